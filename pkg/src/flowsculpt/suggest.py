"""Pillar-sequence suggestions from a trained value network.

Candidates come from three sources: the plain greedy rollout, a small beam
that follows exact Q-value ties instead of always breaking them toward the
lowest action id, and seeded epsilon-greedy rollouts for diversity when more
than one suggestion is requested.  Every candidate is re-scored through the
simulator before ranking, so a suggestion's reported match ratio never
depends on the network being right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import obs_to_input, select_action
from .core import FlowShape, pmr
from .env import EnvConfig, EnvState, reset, step
from .errors import ParameterError
from .formats import shape_to_doc
from .nn import QNetworkParams, forward

BEAM_CAP = 8
EXPLORE_EPSILON = 0.25


@dataclass(frozen=True)
class Suggestion:
    sequence: tuple[int, ...]
    pmr: float
    success: bool
    shapes: tuple[FlowShape, ...]  # inlet first, then the shape after each pillar


def _greedy_rollout(params: QNetworkParams, env: EnvConfig, target: FlowShape) -> EnvState:
    dummy = np.random.default_rng(0)  # epsilon=0 never draws
    state = reset(env, target)
    while not state.done:
        state, _ = step(state, select_action(params, state.current, 0.0, dummy), env)
    return state


def _stochastic_rollout(params: QNetworkParams, env: EnvConfig, target: FlowShape,
                        rng: np.random.Generator, epsilon: float) -> EnvState:
    state = reset(env, target)
    while not state.done:
        state, _ = step(state, select_action(params, state.current, epsilon, rng), env)
    return state


def _tie_beam(params: QNetworkParams, env: EnvConfig, target: FlowShape,
              cap: int) -> list[EnvState]:
    """Expand every exactly-tied argmax action, keeping at most ``cap`` branches."""
    frontier = [reset(env, target)]
    finished: list[EnvState] = []
    while frontier and len(finished) < cap:
        grown: list[EnvState] = []
        for state in frontier:
            q = forward(params, obs_to_input(state.current, params.dtype))[0]
            for action in np.flatnonzero(q == q.max()).tolist():
                nxt, _ = step(state, int(action), env)
                (finished if nxt.done else grown).append(nxt)
        grown.sort(key=lambda s: s.action_history)
        frontier = grown[:cap]
    return finished[:cap]


def _verify(env: EnvConfig, target: FlowShape, sequence: tuple[int, ...]) -> Suggestion:
    """Re-run a candidate through the simulator and score the terminal shape."""
    state = reset(env, target)
    shapes = [state.current]
    for action in sequence:
        if state.done:
            break
        state, _ = step(state, action, env)
        shapes.append(state.current)
    return Suggestion(state.action_history, pmr(state.current, target),
                      state.success, tuple(shapes))


def suggest(params: QNetworkParams, env: EnvConfig, target: FlowShape, k: int = 1,
            seed: int = 0, beam_cap: int = BEAM_CAP,
            explore_epsilon: float = EXPLORE_EPSILON) -> list[Suggestion]:
    """Top ``k`` verified pillar sequences for a target, best first.

    Ordering is match ratio descending, then fewer pillars, then lexicographic
    sequence, so results are stable across calls with the same seed.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    candidates: list[tuple[int, ...]] = []

    def add(state: EnvState):
        if state.action_history not in candidates:
            candidates.append(state.action_history)

    add(_greedy_rollout(params, env, target))
    for state in _tie_beam(params, env, target, beam_cap):
        add(state)
    rng = np.random.default_rng(seed)
    for _ in range(k - 1):
        add(_stochastic_rollout(params, env, target, rng, explore_epsilon))

    verified = [_verify(env, target, seq) for seq in candidates]
    verified.sort(key=lambda s: (-s.pmr, len(s.sequence), s.sequence))
    return verified[:k]


def suggestion_to_doc(s: Suggestion) -> dict:
    return {
        "sequence": list(s.sequence),
        "pmr": s.pmr,
        "success": s.success,
        "steps": [shape_to_doc(shape) for shape in s.shapes],
    }
