"""Double-DQN machinery: exploration, replay, targets, optimizer, sync.

The online network picks the bootstrap action, the target network scores it.
All tie-breaks resolve to the lowest action id so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FlowShape
from .errors import NumericError, ParameterError, UsageError
from .nn import NetworkArchitecture, QNetworkParams, forward, q_loss_and_grads


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay of the exploration rate."""

    start: float = 1.0
    end: float = 0.1
    decay_steps: int = 1_000_000

    def __post_init__(self):
        if not self.start >= self.end >= 0.0:
            raise ParameterError("need start >= end >= 0")
        if self.decay_steps < 1:
            raise ParameterError("decay_steps must be positive")


def epsilon_at(schedule: EpsilonSchedule, global_step: int) -> float:
    if global_step < 0:
        raise ParameterError("global_step must be >= 0")
    frac = min(1.0, global_step / schedule.decay_steps)
    return schedule.start + (schedule.end - schedule.start) * frac


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.99
    learning_rate: float = 0.001
    target_update_interval: int = 4000
    warmup_random_steps: int = 10_000
    batch_size: int = 32
    loss: str = "huber"
    huber_delta: float = 1.0
    rmsprop_rho: float = 0.95
    rmsprop_eps: float = 1e-6
    replay_capacity: int = 100_000
    precision: str = "float64"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ParameterError("gamma must lie in (0, 1)")
        for name in ("learning_rate", "target_update_interval", "warmup_random_steps",
                     "batch_size", "huber_delta", "rmsprop_rho", "rmsprop_eps",
                     "replay_capacity"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.loss not in ("huber", "mse"):
            raise ParameterError(f"loss must be huber or mse, got {self.loss!r}")
        if self.precision not in ("float64", "float32"):
            raise ParameterError("precision must be float64 or float32")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


# Observations are flow shapes in the sculpting environment, but the learning
# machinery is agnostic: any fixed-shape feature array works (the correctness
# tests run it on a tiny chain MDP with one-hot states).
@dataclass(frozen=True)
class Transition:
    state: "FlowShape | np.ndarray"
    action: int
    reward: float
    next_state: "FlowShape | np.ndarray"
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring; oldest transitions are evicted first."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ParameterError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0
        self.inserted = 0

    def __len__(self):
        return len(self._items)

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._next] = t
            self._next = (self._next + 1) % self.capacity
        self.inserted += 1

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform draw with replacement."""
        if n > len(self._items):
            raise UsageError(f"cannot sample {n} from buffer of size {len(self._items)}")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[i] for i in idx]

    def snapshot(self) -> list[Transition]:
        """Current contents, oldest first."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._next:] + self._items[:self._next]


def obs_to_input(obs, dtype=np.float64) -> np.ndarray:
    """Encode one observation as a batch-of-one network input.

    Flow shapes become (1, 1, H, W); plain feature arrays just gain a batch
    axis.
    """
    if isinstance(obs, FlowShape):
        g = obs.grid
        return obs.pixels.astype(dtype).reshape(1, 1, g.h, g.w)
    return np.asarray(obs, dtype=dtype)[None]


def batch_inputs(obs_list, dtype=np.float64) -> np.ndarray:
    first = obs_list[0]
    if isinstance(first, FlowShape):
        g = first.grid
        flat = np.stack([s.pixels for s in obs_list]).astype(dtype)
        return flat.reshape(len(obs_list), 1, g.h, g.w)
    return np.stack([np.asarray(o, dtype=dtype) for o in obs_list])


def greedy_action(q: np.ndarray) -> int:
    """Argmax with lowest-id tie-break (np.argmax takes the first maximum)."""
    return int(np.argmax(q))


def select_action(params: QNetworkParams, obs, epsilon: float,
                  rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ParameterError("epsilon must lie in [0, 1]")
    actions = params.arch.output_units
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, actions))
    q = forward(params, obs_to_input(obs, params.dtype))
    return greedy_action(q[0])


def ddqn_targets(batch: list[Transition], online: QNetworkParams,
                 target: QNetworkParams, gamma: float) -> np.ndarray:
    """Bootstrap values: reward, plus the target net's score of the online
    net's argmax action at the next state for non-terminal transitions."""
    if not batch:
        raise ParameterError("batch must be nonempty")
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    dones = np.array([t.done for t in batch], dtype=bool)
    ys = rewards.copy()
    live = ~dones
    if live.any():
        nxt = [t.next_state for t in batch if not t.done]
        x = batch_inputs(nxt, online.dtype)
        q_online = forward(online, x)
        q_target = forward(target, x)
        if not (np.isfinite(q_online).all() and np.isfinite(q_target).all()):
            raise NumericError("non-finite Q-values in target computation")
        best = np.argmax(q_online, axis=1)
        ys[live] += gamma * q_target[np.arange(len(nxt)), best]
    return ys


def loss_and_grads(online: QNetworkParams, batch: list[Transition],
                   targets: np.ndarray, cfg: AgentConfig):
    """(loss, grads, new_buffers) for one replay batch."""
    targets = np.asarray(targets, dtype=np.float64)
    if len(batch) != targets.shape[0]:
        raise ParameterError("batch and targets lengths differ")
    x = batch_inputs([t.state for t in batch], online.dtype)
    actions = np.array([t.action for t in batch], dtype=np.int64)
    return q_loss_and_grads(online, x, actions, targets,
                            loss=cfg.loss, delta=cfg.huber_delta)


def rmsprop_init(params: QNetworkParams) -> dict[str, np.ndarray]:
    """Zeroed second-moment accumulators, one per trainable tensor."""
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


def rmsprop_step(params: QNetworkParams, grads: dict[str, np.ndarray],
                 opt_state: dict[str, np.ndarray], cfg: AgentConfig):
    """v <- rho*v + (1-rho)*g^2 ; w <- w - lr*g/(sqrt(v)+eps)."""
    rho, lr, eps = cfg.rmsprop_rho, cfg.learning_rate, cfg.rmsprop_eps
    new_tensors: dict[str, np.ndarray] = {}
    new_state: dict[str, np.ndarray] = {}
    for name, w in params.tensors.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ParameterError(f"gradient shape mismatch for {name}")
        v = rho * opt_state[name] + (1.0 - rho) * g * g
        w_new = w - lr * g / (np.sqrt(v) + eps)
        if not np.isfinite(w_new).all():
            raise NumericError(f"non-finite update for tensor {name}")
        new_state[name] = v
        new_tensors[name] = w_new
    return params.with_tensors(new_tensors), new_state


def sync_target(online: QNetworkParams, target_slot: QNetworkParams | None = None) -> QNetworkParams:
    """Target network becomes an exact copy of the online network."""
    return online.copy()
