"""Training orchestration: episodes, replay updates, syncs, metrics, transfer.

One call to :func:`train` owns all mutable state (network, optimizer, replay,
metric streams) and is fully deterministic given its seed.  Scratch-vs-
transfer comparisons therefore run as independent calls with matched seeds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agent import (AgentConfig, EpsilonSchedule, ReplayBuffer, Transition, ddqn_targets,
                    epsilon_at, loss_and_grads, rmsprop_init, rmsprop_step, select_action,
                    sync_target)
from .artifacts import Counters, EpisodeLog, RunArtifacts, SolutionTable, compute_windows
from .checkpoint import checkpoint_doc, params_from_doc
from .core import (FlowShape, GridSpec, PillarLibrary, apply_pillar, apply_sequence,
                   make_inlet, pmr, shape_hash, surrogate_library)
from .env import EnvConfig, reset, rollout, step
from .errors import CheckpointError, DocumentError, ParameterError
from .formats import (canonical_json, load_library, load_shape, parse_grid, parse_inlet,
                      read_json, shape_to_doc)
from .nn import (NetworkArchitecture, QNetworkParams, arch_from_doc, arch_to_doc,
                 conv_architecture, dense_architecture, init_params)

# Paper-scale protocol constants; desk runs scale the first three together.
FULL_EPISODES = 300_000
FULL_WARMUP_STEPS = 10_000
FULL_DECAY_STEPS = 1_000_000
DESK_SCALE = 1.0 / 6.0


def desk_scaled(scale: float = DESK_SCALE) -> dict:
    """Episode/warmup/decay counts shrunk linearly so the schedule keeps its shape."""
    if scale <= 0:
        raise ParameterError("scale must be positive")
    return {
        "episodes": round(FULL_EPISODES * scale),
        "warmup_random_steps": round(FULL_WARMUP_STEPS * scale),
        "decay_steps": round(FULL_DECAY_STEPS * scale),
    }


@dataclass(frozen=True)
class TrainConfig:
    env: EnvConfig
    agent: AgentConfig
    schedule: EpsilonSchedule
    episodes: int = 50_000
    success_window: int = 1000
    eval_every: int = 0
    seed: int = 0
    architecture: NetworkArchitecture | None = None

    def __post_init__(self):
        if self.episodes < 0 or self.success_window < 1 or self.eval_every < 0:
            raise ParameterError("episode and window counts must be positive")

    def resolved_architecture(self) -> NetworkArchitecture:
        if self.architecture is not None:
            return self.architecture
        g = self.env.library.grid
        return dense_architecture((1, g.h, g.w), actions=self.env.library.actions)


def desk_config(env: EnvConfig, seed: int = 0, scale: float = DESK_SCALE,
                **overrides) -> TrainConfig:
    scaled = desk_scaled(scale)
    agent = overrides.pop("agent", AgentConfig(warmup_random_steps=scaled["warmup_random_steps"]))
    schedule = overrides.pop("schedule", EpsilonSchedule(decay_steps=scaled["decay_steps"]))
    episodes = overrides.pop("episodes", scaled["episodes"])
    return TrainConfig(env=env, agent=agent, schedule=schedule, episodes=episodes,
                       seed=seed, **overrides)


def resolved_config_doc(cfg: TrainConfig, target: FlowShape, extra: dict | None = None) -> dict:
    env, agent, sched = cfg.env, cfg.agent, cfg.schedule
    doc = {
        "grid": {"h": env.library.grid.h, "w": env.library.grid.w},
        "library": {"provenance": env.library.provenance, "actions": env.library.actions},
        "inlet": shape_to_doc(env.inlet),
        "env": {
            "max_steps": env.max_steps,
            "pmr_threshold": env.pmr_threshold,
            "baseline_b": env.baseline_b,
            "headroom_scaling": env.headroom_scaling,
        },
        "agent": {
            "gamma": agent.gamma,
            "learning_rate": agent.learning_rate,
            "target_update_interval": agent.target_update_interval,
            "warmup_random_steps": agent.warmup_random_steps,
            "batch_size": agent.batch_size,
            "loss": agent.loss,
            "huber_delta": agent.huber_delta,
            "rmsprop_rho": agent.rmsprop_rho,
            "rmsprop_eps": agent.rmsprop_eps,
            "replay_capacity": agent.replay_capacity,
            "precision": agent.precision,
        },
        "schedule": {"start": sched.start, "end": sched.end, "decay_steps": sched.decay_steps},
        "train": {
            "episodes": cfg.episodes,
            "success_window": cfg.success_window,
            "eval_every": cfg.eval_every,
            "seed": cfg.seed,
        },
        "architecture": arch_to_doc(cfg.resolved_architecture()),
        "target": shape_to_doc(target),
    }
    doc.update(extra or {})
    return doc


def _cast_params(params: QNetworkParams, dtype) -> QNetworkParams:
    if params.dtype == dtype:
        return params
    return QNetworkParams(
        params.arch,
        {k: v.astype(dtype) for k, v in params.tensors.items()},
        {k: v.astype(dtype) for k, v in params.buffers.items()},
    )


def checkpoint_digest(doc: dict) -> str:
    """Short content id of a checkpoint document (used for lineage records)."""
    return hashlib.blake2b(canonical_json(doc).encode(), digest_size=8).hexdigest()


def train(cfg: TrainConfig, target: FlowShape, init_checkpoint: dict | None = None,
          out_dir=None, replay: ReplayBuffer | None = None,
          config_extra: dict | None = None) -> RunArtifacts:
    """Run the full training protocol against one fixed target shape.

    Uniform-random actions until the warm-up step budget is spent, then
    epsilon-greedy on the decay schedule; one gradient step per environment
    step once warm-up completes and the replay holds a full batch; the target
    network re-syncs on a fixed gradient-step cadence.  If ``out_dir`` is
    given the artifact tables are written there, including a diagnostic dump
    when the run aborts.
    """
    env, a_cfg = cfg.env, cfg.agent
    actions = env.library.actions
    arch = cfg.resolved_architecture()
    rng = np.random.default_rng(cfg.seed)

    lineage: list[str] = []
    if init_checkpoint is not None:
        params, opt_state, meta = params_from_doc(init_checkpoint, expect_arch=arch)
        params = _cast_params(params, a_cfg.dtype)
        if opt_state is None:
            opt_state = rmsprop_init(params)
        else:
            opt_state = {k: v.astype(a_cfg.dtype) for k, v in opt_state.items()}
        lineage = list(meta.get("lineage") or []) + [checkpoint_digest(init_checkpoint)]
    else:
        params = init_params(arch, rng, a_cfg.dtype)
        opt_state = rmsprop_init(params)
    target_params = sync_target(params)

    if replay is None:
        replay = ReplayBuffer(a_cfg.replay_capacity)
    counters = Counters()
    seen: set[int] = set()
    unique_counts: list[int] = []
    episodes: list[EpisodeLog] = []
    solutions = SolutionTable()
    evals: list[dict] = []
    config_doc = resolved_config_doc(cfg, target, config_extra)
    error: str | None = None

    try:
        for ep in range(cfg.episodes):
            state = reset(env, target)
            seen.add(shape_hash(state.current))
            ep_reward = 0.0
            res = None
            while not state.done:
                if counters.env_steps < a_cfg.warmup_random_steps:
                    action = int(rng.integers(0, actions))
                else:
                    eps = epsilon_at(cfg.schedule, counters.env_steps)
                    action = select_action(params, state.current, eps, rng)
                prev_obs = state.current
                state, res = step(state, action, env)
                replay.push(Transition(prev_obs, action, res.reward, res.observation, res.done))
                counters.env_steps += 1
                seen.add(shape_hash(res.observation))
                ep_reward += res.reward

                if (counters.env_steps >= a_cfg.warmup_random_steps
                        and len(replay) >= a_cfg.batch_size):
                    batch = replay.sample(a_cfg.batch_size, rng)
                    ys = ddqn_targets(batch, params, target_params, a_cfg.gamma)
                    _, grads, new_buffers = loss_and_grads(params, batch, ys, a_cfg)
                    params = params.with_buffers(new_buffers)
                    params, opt_state = rmsprop_step(params, grads, opt_state, a_cfg)
                    if counters.gradient_steps == 0:
                        counters.first_gradient_step = counters.env_steps
                    counters.gradient_steps += 1
                    if counters.gradient_steps % a_cfg.target_update_interval == 0:
                        target_params = sync_target(params)
                        counters.target_syncs += 1

            log = EpisodeLog(ep, ep_reward, state.steps_taken, state.success,
                             res.pmr, state.action_history)
            episodes.append(log)
            counters.episodes += 1
            if state.success:
                counters.successes += 1
                solutions.record(log)
            unique_counts.append(len(seen))

            if cfg.eval_every and (ep + 1) % cfg.eval_every == 0:
                summary = _greedy_episode(params, env, target)
                evals.append({"episode": ep, **summary})
    except Exception as exc:
        error = f"{type(exc).__name__}: {exc}"
        if out_dir is not None:
            _finish(cfg, target, params, opt_state, lineage, episodes, unique_counts,
                    solutions, counters, config_doc, evals, error).write(out_dir)
        raise

    artifacts = _finish(cfg, target, params, opt_state, lineage, episodes, unique_counts,
                        solutions, counters, config_doc, evals, error)
    if out_dir is not None:
        artifacts.write(out_dir)
    return artifacts


def _finish(cfg, target, params, opt_state, lineage, episodes, unique_counts,
            solutions, counters, config_doc, evals, error) -> RunArtifacts:
    metadata = {
        "grid": cfg.env.library.grid,
        "seed": cfg.seed,
        "global_step": counters.env_steps,
        "episodes": counters.episodes,
        "library_provenance": cfg.env.library.provenance,
        "lineage": lineage,
    }
    ckpt = checkpoint_doc(params, opt_state, metadata)
    final_eval = _greedy_episode(params, cfg.env, target) if error is None else None
    artifacts = RunArtifacts(
        config_doc=config_doc,
        episodes=episodes,
        windows=compute_windows(episodes, cfg.success_window),
        unique_counts=unique_counts,
        solutions=solutions,
        counters=counters,
        checkpoint_doc=ckpt,
        final_eval=final_eval,
        error=error,
    )
    if evals:
        artifacts.final_eval = {"periodic": evals, **(final_eval or {})}
    return artifacts


def _greedy_episode(params: QNetworkParams, env: EnvConfig, target: FlowShape) -> dict:
    dummy = np.random.default_rng(0)  # epsilon=0 never draws from it
    terminal, total = rollout(env, target, lambda obs: select_action(params, obs, 0.0, dummy))
    return {
        "success": terminal.success,
        "pmr": pmr(terminal.current, target),
        "length": terminal.steps_taken,
        "sequence": list(terminal.action_history),
        "reward": total,
    }


def evaluate(checkpoint: dict, env: EnvConfig, target: FlowShape, n_episodes: int = 1) -> dict:
    """Greedy-policy evaluation summary for a trained checkpoint.

    The greedy policy is deterministic, so a single rollout represents every
    episode; the note records that.
    """
    if n_episodes < 1:
        raise ParameterError("n_episodes must be >= 1")
    params, _, meta = params_from_doc(checkpoint)
    grid = env.library.grid
    if meta.get("grid") not in (None, {"h": grid.h, "w": grid.w}):
        raise CheckpointError(f"checkpoint grid {meta.get('grid')} does not match env grid {grid}")
    if params.arch.input_shape not in ((1, grid.h, grid.w), (grid.h * grid.w,)):
        raise CheckpointError("checkpoint network does not accept this environment's shapes")
    one = _greedy_episode(params, env, target)
    return {
        "episodes": n_episodes,
        "success_rate": 1.0 if one["success"] else 0.0,
        "mean_pmr": one["pmr"],
        "mean_length": float(one["length"]),
        "best_sequence": one["sequence"],
        "note": "greedy policy is deterministic: one rollout evaluated, identical across episodes",
    }


def unique_states(logs: list[EpisodeLog], library: PillarLibrary, inlet: FlowShape) -> list[int]:
    """Replay logged histories; cumulative distinct-shape count per episode."""
    seen: set[int] = set()
    out = []
    for log in logs:
        seen.add(shape_hash(inlet))
        cur = inlet
        for action in log.sequence:
            cur = apply_pillar(cur, library.maps[action])
            seen.add(shape_hash(cur))
        out.append(len(seen))
    return out


def make_targets(library: PillarLibrary, rng: np.random.Generator, count: int,
                 length: int, inlet: FlowShape | None = None):
    """Sample random pillar sequences and keep their distinct end shapes.

    Returns (sequence, shape) pairs; duplicates (by content hash) are
    discarded and re-drawn.
    """
    if length < 1:
        raise ParameterError("length must be >= 1")
    if count < 1:
        raise ParameterError("count must be >= 1")
    if inlet is None:
        inlet = make_inlet(library.grid)
    seen: set[int] = set()
    out = []
    tries = 0
    limit = 100 * count
    while len(out) < count:
        if tries >= limit:
            raise ParameterError(
                f"could not generate {count} distinct targets in {limit} draws")
        seq = tuple(int(a) for a in rng.integers(0, library.actions, size=length))
        shape = apply_sequence(inlet, seq, library)[-1]
        digest = shape_hash(shape)
        tries += 1
        if digest in seen:
            continue
        seen.add(digest)
        out.append((seq, shape))
    return out


@dataclass(frozen=True)
class CurriculumSpec:
    """Ordered (target, episode budget) stages plus an optional warm start."""

    stages: tuple[tuple[FlowShape, int], ...]
    init_checkpoint: dict | None = None

    def __post_init__(self):
        if not self.stages:
            raise ParameterError("curriculum needs at least one stage")
        for i, (_, budget) in enumerate(self.stages):
            if budget < 1:
                raise ParameterError(f"stage {i} budget must be positive")


def restart_schedule(base: EpsilonSchedule, restart: float) -> EpsilonSchedule:
    """Same decay slope as ``base`` but starting from a lower epsilon."""
    if restart >= base.start:
        return base
    if restart <= base.end:
        return EpsilonSchedule(base.end, base.end, 1)
    steps = max(1, round(base.decay_steps * (restart - base.end) / (base.start - base.end)))
    return EpsilonSchedule(restart, base.end, steps)


def stage_seed(base_seed: int, stage_index: int) -> int:
    return base_seed + stage_index


def transfer_train(curriculum: CurriculumSpec, cfg: TrainConfig, out_dir=None,
                   epsilon_restart: float = 0.3,
                   retain_replay: bool = False) -> list[RunArtifacts]:
    """Train through the curriculum, warm-starting each stage from the last.

    Later stages restart exploration at ``epsilon_restart`` (same decay
    slope); the replay buffer is cleared at stage boundaries unless
    ``retain_replay`` asks to keep it for ablations.
    """
    grid = cfg.env.library.grid
    for i, (target, _) in enumerate(curriculum.stages):
        if target.grid != grid:
            raise ParameterError(f"curriculum stage {i} target grid differs from library grid")

    results: list[RunArtifacts] = []
    init = curriculum.init_checkpoint
    shared_replay = ReplayBuffer(cfg.agent.replay_capacity) if retain_replay else None
    for i, (target, budget) in enumerate(curriculum.stages):
        schedule = cfg.schedule if i == 0 else restart_schedule(cfg.schedule, epsilon_restart)
        stage_cfg = replace(cfg, episodes=budget, seed=stage_seed(cfg.seed, i),
                            schedule=schedule)
        stage_out = None if out_dir is None else Path(out_dir) / f"stage_{i:02d}"
        artifacts = train(stage_cfg, target, init_checkpoint=init, out_dir=stage_out,
                          replay=shared_replay,
                          config_extra={"transfer": {"stage": i, "stages": len(curriculum.stages),
                                                     "epsilon_restart": epsilon_restart,
                                                     "retain_replay": retain_replay}})
        results.append(artifacts)
        init = artifacts.checkpoint_doc
    return results


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise DocumentError(f"config section {key!r} must be an object")
    return dict(value)


def _grid_value(value) -> GridSpec:
    if isinstance(value, str):
        return parse_grid(value)
    if isinstance(value, dict) and set(value) >= {"h", "w"}:
        return GridSpec(int(value["h"]), int(value["w"]))
    raise DocumentError(f"grid entry {value!r} must be 'HxW' or an object with h and w")


def _library_value(value, grid: GridSpec, base: Path) -> PillarLibrary:
    if value is None or value == {"surrogate": True} or value == "surrogate":
        return surrogate_library(grid)
    if isinstance(value, dict) and "file" in value:
        library = load_library(base / value["file"])
        if library.grid != grid:
            raise DocumentError(
                f"library grid {library.grid.h}x{library.grid.w} does not match "
                f"configured grid {grid.h}x{grid.w}")
        return library
    raise DocumentError(f"library entry {value!r} must be 'surrogate' or {{'file': path}}")


def _inlet_value(value, grid: GridSpec, base: Path) -> FlowShape:
    if value is None:
        return make_inlet(grid)
    if isinstance(value, str):
        lo, hi = parse_inlet(value)
        return make_inlet(grid, lo, hi)
    if isinstance(value, dict) and "file" in value:
        shape = load_shape(base / value["file"])
        if shape.grid != grid:
            raise DocumentError("inlet shape grid does not match configured grid")
        return shape
    raise DocumentError(f"inlet entry {value!r} must be 'LO:HI' or {{'file': path}}")


def _target_value(value, library: PillarLibrary, inlet: FlowShape, base: Path):
    """Resolve a target entry to (shape, provenance-extra for the config doc)."""
    if not isinstance(value, dict):
        raise DocumentError("target entry must be an object")
    if "file" in value:
        shape = load_shape(base / value["file"])
        if shape.grid != library.grid:
            raise DocumentError("target shape grid does not match configured grid")
        return shape, {"target_source": {"file": str(value["file"])}}
    if "sequence" in value:
        seq = [int(a) for a in value["sequence"]]
        if not seq:
            raise DocumentError("target sequence must not be empty")
        shape = apply_sequence(inlet, seq, library)[-1]
        return shape, {"target_source": {"sequence": seq}}
    if "random" in value:
        spec = value["random"]
        length = int(spec.get("length", 2))
        seed = int(spec.get("seed", 0))
        seq, shape = make_targets(library, np.random.default_rng(seed), 1, length, inlet)[0]
        return shape, {"target_source": {"random": {"length": length, "seed": seed},
                                         "sequence": list(seq)}}
    raise DocumentError("target entry needs one of: file, sequence, random")


def _build(cls, fields: dict, section: str):
    try:
        return cls(**fields)
    except TypeError as exc:
        raise DocumentError(f"config section {section!r}: {exc}") from None


def train_config_from_doc(doc: dict, base_dir=None):
    """Resolve a JSON run configuration into (config, target, provenance extra).

    Counts omitted from the document default to the desk-scale protocol; a
    top-level "scale" entry rescales those defaults while explicit values
    always win.
    """
    if not isinstance(doc, dict):
        raise DocumentError("run config must be a JSON object")
    base = Path(base_dir) if base_dir is not None else Path(".")
    grid = _grid_value(doc.get("grid", "12x32"))
    library = _library_value(doc.get("library"), grid, base)
    inlet = _inlet_value(doc.get("inlet"), grid, base)
    scaled = desk_scaled(float(doc.get("scale", DESK_SCALE)))

    agent_fields = _section(doc, "agent")
    agent_fields.setdefault("warmup_random_steps", scaled["warmup_random_steps"])
    agent = _build(AgentConfig, agent_fields, "agent")

    sched_fields = _section(doc, "schedule")
    sched_fields.setdefault("decay_steps", scaled["decay_steps"])
    schedule = _build(EpsilonSchedule, sched_fields, "schedule")

    env_fields = _section(doc, "env")
    env = _build(EnvConfig, {"library": library, "inlet": inlet, **env_fields}, "env")

    arch_value = doc.get("architecture", "dense")
    if arch_value == "dense":
        architecture = None
    elif arch_value == "conv":
        architecture = conv_architecture((1, grid.h, grid.w), actions=library.actions)
    elif isinstance(arch_value, dict) and arch_value.get("kind") == "dense":
        hidden = tuple(int(u) for u in arch_value.get("hidden", (128, 64)))
        architecture = dense_architecture((1, grid.h, grid.w),
                                          actions=library.actions, hidden=hidden)
    elif isinstance(arch_value, dict) and arch_value.get("kind") == "conv":
        architecture = conv_architecture((1, grid.h, grid.w), actions=library.actions)
    elif isinstance(arch_value, dict):
        architecture = arch_from_doc(arch_value)
    else:
        raise DocumentError(f"architecture entry {arch_value!r} must be "
                            "'dense', 'conv', or an architecture object")

    cfg = TrainConfig(
        env=env,
        agent=agent,
        schedule=schedule,
        episodes=int(doc.get("episodes", scaled["episodes"])),
        success_window=int(doc.get("success_window", 1000)),
        eval_every=int(doc.get("eval_every", 0)),
        seed=int(doc.get("seed", 0)),
        architecture=architecture,
    )
    target, extra = (None, None)
    if "target" in doc:
        target, extra = _target_value(doc["target"], library, inlet, base)
    return cfg, target, extra


def transfer_spec_from_doc(doc: dict, base_dir=None):
    """Resolve a JSON curriculum configuration into (config, curriculum, options)."""
    cfg, _, _ = train_config_from_doc({k: v for k, v in doc.items() if k != "target"},
                                      base_dir)
    base = Path(base_dir) if base_dir is not None else Path(".")
    stages_value = doc.get("stages")
    if not isinstance(stages_value, list) or not stages_value:
        raise DocumentError("transfer config needs a non-empty 'stages' list")
    stages = []
    for i, entry in enumerate(stages_value):
        if not isinstance(entry, dict) or "target" not in entry:
            raise DocumentError(f"stage {i} must be an object with a target entry")
        shape, _ = _target_value(entry["target"], cfg.env.library, cfg.env.inlet, base)
        stages.append((shape, int(entry.get("episodes", cfg.episodes))))
    init_doc = None
    if "init_checkpoint" in doc:
        init_doc = read_json(base / doc["init_checkpoint"])
    curriculum = CurriculumSpec(tuple(stages), init_doc)
    options = {
        "epsilon_restart": float(doc.get("epsilon_restart", 0.3)),
        "retain_replay": bool(doc.get("retain_replay", False)),
    }
    return cfg, curriculum, options
