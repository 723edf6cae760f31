"""Inverse design of sculpted inertial flow shapes with pillar sequences.

A deterministic shape simulator (pillar deformations as precomputed index
maps), a pixel match ratio objective, a sequential design environment, a
hand-rolled value network with analytic gradients, a double-estimator
Q-learning trainer with transfer across targets, and file/HTTP interfaces
around all of it.
"""

from .agent import (AgentConfig, EpsilonSchedule, ReplayBuffer, Transition, ddqn_targets,
                    epsilon_at, greedy_action, rmsprop_init, rmsprop_step, select_action,
                    sync_target)
from .artifacts import Counters, EpisodeLog, RunArtifacts, SolutionTable, WindowStat
from .checkpoint import checkpoint_doc, load_checkpoint, params_from_doc, save_checkpoint
from .core import (AdvectionMap, FlowShape, GridSpec, PillarLibrary, apply_pillar,
                   apply_sequence, build_surrogate_map, identity_map, make_inlet, pmr,
                   shape_hash, surrogate_library)
from .env import EnvConfig, EnvState, StepResult, default_env, reset, reward_fn, rollout, step
from .errors import (CheckpointError, DocumentError, EmptyTargetError, FlowSculptError,
                     GridMismatchError, NumericError, ParameterError, UsageError)
from .formats import (canonical_json, library_from_doc, library_to_doc, load_library,
                      load_shape, parse_grid, parse_inlet, parse_sequence, read_json,
                      save_library, save_shape, shape_from_doc, shape_to_doc,
                      simulate_doc, write_document)
from .nn import (NetworkArchitecture, QNetworkParams, conv_architecture, dense_architecture,
                 forward, init_params, q_loss_and_grads)
from .suggest import Suggestion, suggest, suggestion_to_doc
from .trainer import (CurriculumSpec, TrainConfig, desk_config, desk_scaled, evaluate,
                      make_targets, train, train_config_from_doc, transfer_spec_from_doc,
                      transfer_train, unique_states)

__version__ = "0.1.0"
