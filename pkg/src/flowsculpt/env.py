"""Episodic decision process over flow shapes.

An episode starts from the inlet with a fixed goal shape.  Each step places
one pillar, deforms the current shape, and pays a shaped negative reward; the
episode ends when the match rate reaches the threshold or the step budget is
spent.  Config and state are immutable values, so independent episodes can
run concurrently without coordination.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

from .core import FlowShape, PillarLibrary, apply_pillar, make_inlet, pmr
from .errors import EmptyTargetError, GridMismatchError, ParameterError, UsageError

DEFAULT_MAX_STEPS = 7
DEFAULT_PMR_THRESHOLD = 0.90
BULK_PMR_THRESHOLD = 0.85
DEFAULT_BASELINE = 0.5


@dataclass(frozen=True)
class EnvConfig:
    library: PillarLibrary
    inlet: FlowShape
    max_steps: int = DEFAULT_MAX_STEPS
    pmr_threshold: float = DEFAULT_PMR_THRESHOLD
    baseline_b: float = DEFAULT_BASELINE
    # Off: reward scales the shortfall by b (the published form).  On: scales
    # by the headroom 1-b instead; the two coincide at b = 0.5.
    headroom_scaling: bool = False

    def __post_init__(self):
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")
        if not 0.0 < self.baseline_b < 1.0:
            raise ParameterError("baseline_b must lie strictly inside (0, 1)")
        if not 0.0 < self.pmr_threshold <= 1.0:
            raise ParameterError("pmr_threshold must lie in (0, 1]")
        if self.inlet.grid != self.library.grid:
            raise GridMismatchError("inlet grid != library grid")


def default_env(library: PillarLibrary, **overrides) -> EnvConfig:
    """EnvConfig with the standard central-stripe inlet."""
    return EnvConfig(library=library, inlet=make_inlet(library.grid), **overrides)


@dataclass(frozen=True)
class EnvState:
    current: FlowShape
    target: FlowShape
    steps_taken: int = 0
    action_history: tuple[int, ...] = field(default_factory=tuple)
    done: bool = False
    success: bool = False


@dataclass(frozen=True)
class StepResult:
    observation: FlowShape
    reward: float
    done: bool
    success: bool
    pmr: float


def reward_fn(p: float, b: float, headroom_scaling: bool = False) -> float:
    """Shaped reward -(1 - (p - b)/denominator); 0 at a perfect match."""
    denom = (1.0 - b) if headroom_scaling else b
    return -(1.0 - (p - b) / denom)


def reset(env: EnvConfig, target: FlowShape) -> EnvState:
    if target.grid != env.library.grid:
        raise GridMismatchError("target grid != library grid")
    if target.on_count() == 0:
        raise EmptyTargetError("target shape is empty")
    return EnvState(current=env.inlet, target=target)


def step(state: EnvState, action: int, env: EnvConfig) -> tuple[EnvState, StepResult]:
    if state.done:
        raise UsageError("episode already finished; reset before stepping")
    a = int(action)
    if not 0 <= a < env.library.actions:
        raise ParameterError(f"action {action} outside [0, {env.library.actions})")

    nxt = apply_pillar(state.current, env.library.maps[a])
    p = pmr(nxt, state.target)
    r = reward_fn(p, env.baseline_b, env.headroom_scaling)
    success = p >= env.pmr_threshold
    steps = state.steps_taken + 1
    done = success or steps >= env.max_steps
    new_state = replace(
        state,
        current=nxt,
        steps_taken=steps,
        action_history=state.action_history + (a,),
        done=done,
        success=success,
    )
    return new_state, StepResult(observation=nxt, reward=r, done=done, success=success, pmr=p)


def rollout(env: EnvConfig, target: FlowShape,
            policy: Callable[[FlowShape], int]) -> tuple[EnvState, float]:
    """Run one episode under ``policy``; returns terminal state and reward sum."""
    state = reset(env, target)
    total = 0.0
    while not state.done:
        state, res = step(state, policy(state.current), env)
        total += res.reward
    return state, total
