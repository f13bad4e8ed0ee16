"""Deterministic microworld semantics.

A microworld is a discrete-time linear dynamical system: the state vector
(crop values) drifts under a coupling matrix ``A`` each round, while actions
(resource inputs) enter through ``B``.  Goals are target values with a
positive diagonal scale and an achievement threshold on the scale-weighted
distance; a subgoal constrains only a subset of state dimensions.

Everything in this module is pure and free of randomness; agents and the
subgoal optimizer build on top of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Environment",
    "GoalSpec",
    "GoalProgram",
    "Trajectory",
    "ScoreWeights",
    "step",
    "weighted_distance",
    "is_achieved",
    "scale_to_tolerance",
    "tolerance_to_scale",
    "goal_achievement_score",
    "distance_score",
    "resource_usage",
]


def _as_float_vector(x, name: str, length: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Environment:
    """A linear dynamical microworld: s' = A s + B a.

    A is N x N (how states carry over and couple round to round), B is N x M
    (how the M action inputs move the N states).
    """

    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        names = tuple(self.state_names)
        anames = tuple(self.action_names)
        if len(names) < 1 or len(anames) < 1:
            raise ValueError("need at least one state and one action")
        if len(set(names)) != len(names):
            raise ValueError("state_names contains duplicates")
        if len(set(anames)) != len(anames):
            raise ValueError("action_names contains duplicates")
        n, m = len(names), len(anames)
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}, got {A.shape}")
        if B.shape != (n, m):
            raise ValueError(f"B must be {n}x{m}, got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("A and B must contain only finite values")
        object.__setattr__(self, "state_names", names)
        object.__setattr__(self, "action_names", anames)
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)


@dataclass(frozen=True)
class GoalSpec:
    """Target values over a dimension subset, with scale and threshold.

    ``dims`` is a strictly-increasing index set; the final goal uses all
    dimensions, a subgoal any nonempty subset.  ``scale`` holds the positive
    diagonal weights of the achievement distance, ``threshold`` the radius of
    the achievement region.
    """

    dims: tuple[int, ...]
    targets: np.ndarray
    scale: np.ndarray
    threshold: float

    def __post_init__(self):
        dims = tuple(int(i) for i in self.dims)
        if len(dims) < 1:
            raise ValueError("dims must be nonempty")
        if any(i < 0 for i in dims):
            raise ValueError("dims must be nonnegative indices")
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ValueError("dims must be strictly increasing")
        targets = _as_float_vector(self.targets, "targets", len(dims))
        scale = _as_float_vector(self.scale, "scale", len(dims))
        if np.any(scale <= 0):
            raise ValueError("scale entries must be positive")
        thr = float(self.threshold)
        if not math.isfinite(thr) or thr <= 0:
            raise ValueError("threshold must be a positive finite number")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "targets", _frozen(targets))
        object.__setattr__(self, "scale", _frozen(scale))
        object.__setattr__(self, "threshold", thr)

    @property
    def n_dims(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class GoalProgram:
    """The ordered goals an agent works through: subgoals first, final last."""

    subgoals: tuple[GoalSpec, ...]
    final: GoalSpec

    def __post_init__(self):
        subgoals = tuple(self.subgoals)
        n = self.final.n_dims
        if self.final.dims != tuple(range(n)):
            raise ValueError("final goal must cover all state dimensions")
        for k, sg in enumerate(subgoals):
            if sg.dims[-1] >= n:
                raise ValueError(f"subgoal {k} references dimension {sg.dims[-1]} >= N={n}")
        object.__setattr__(self, "subgoals", subgoals)

    @property
    def goals(self) -> tuple[GoalSpec, ...]:
        return self.subgoals + (self.final,)

    @property
    def n_states(self) -> int:
        return self.final.n_dims


@dataclass(frozen=True)
class ScoreWeights:
    """Weights of the two trajectory scores.

    w1/w2/w3 parameterize the goal-achievement score (endowment, per-round
    reward, per-unit resource cost); c is the resource penalty inside the
    distance score.
    """

    w1: float = 0.2
    w2: float = 0.3
    w3: float = 0.005
    c: float = 0.01

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class Trajectory:
    """States and actions of one T-round episode.

    ``states`` has T+1 rows (s_0 .. s_T), ``actions`` T rows.  The flag
    ``final_goal_achieved[t]`` refers to the post-action state s_{t+1};
    ``active_goal_index[t]`` records which element of the goal program the
    agent pursued in round t.
    """

    states: np.ndarray
    actions: np.ndarray
    final_goal_achieved: np.ndarray = field(repr=False)
    active_goal_index: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        if states.ndim != 2 or actions.ndim != 2:
            raise ValueError("states and actions must be 2-D arrays")
        if states.shape[0] != actions.shape[0] + 1:
            raise ValueError("need exactly one more state than actions")
        achieved = np.asarray(self.final_goal_achieved, dtype=bool)
        active = np.asarray(self.active_goal_index, dtype=np.int64)
        if achieved.shape != (actions.shape[0],) or active.shape != (actions.shape[0],):
            raise ValueError("per-round flags must have one entry per action")
        object.__setattr__(self, "states", _frozen(states))
        object.__setattr__(self, "actions", _frozen(actions))
        object.__setattr__(self, "final_goal_achieved", _frozen(achieved))
        object.__setattr__(self, "active_goal_index", _frozen(active))

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]


def step(env: Environment, s, a) -> np.ndarray:
    """One round of dynamics: A s + B a."""
    s = _as_float_vector(s, "s", env.n_states)
    a = _as_float_vector(a, "a", env.n_actions)
    return env.A @ s + env.B @ a


def weighted_distance(s, goal: GoalSpec) -> float:
    """Scale-weighted distance between the reduced state and the targets.

    sqrt(sum_i scale_i * (s_i - target_i)^2) over the goal's dimensions.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ValueError(f"s must be a 1-D vector, got shape {s.shape}")
    if goal.dims[-1] >= s.shape[0]:
        raise ValueError(f"goal references dimension {goal.dims[-1]} >= len(s)={s.shape[0]}")
    diff = s[list(goal.dims)] - goal.targets
    return float(np.sqrt(np.sum(goal.scale * diff * diff)))


def is_achieved(s, goal: GoalSpec) -> bool:
    """Whether the state lies within the goal's threshold (boundary inclusive)."""
    return weighted_distance(s, goal) <= goal.threshold


def scale_to_tolerance(goal: GoalSpec) -> np.ndarray:
    """Per-dimension tolerance band implied by the goal's scale.

    theta_i = threshold / sqrt(d * scale_i) with d the number of goal
    dimensions: the half-width of the achievement region along dimension i
    if the distance were spread evenly across dimensions.
    """
    d = goal.n_dims
    return goal.threshold / np.sqrt(d * goal.scale)


def tolerance_to_scale(tolerances, threshold: float) -> np.ndarray:
    """Inverse of scale_to_tolerance: recover scale weights from tolerances."""
    tol = _as_float_vector(tolerances, "tolerances")
    if np.any(tol <= 0):
        raise ValueError("tolerances must be positive")
    if not (math.isfinite(threshold) and threshold > 0):
        raise ValueError("threshold must be a positive finite number")
    d = tol.shape[0]
    return threshold**2 / (d * tol**2)


def resource_usage(traj: Trajectory) -> float:
    """Total resources spent: the sum of L1 norms of all actions."""
    return float(np.sum(np.abs(traj.actions)))


def goal_achievement_score(traj: Trajectory, final: GoalSpec, w: ScoreWeights = ScoreWeights()) -> float:
    """Endowment plus reward per achieved round minus resource cost, floored at 0.

    x counts the post-action states s_1..s_T satisfying the final goal
    (whether or not a subgoal was active that round), y is total resource use.
    """
    x = int(np.sum(traj.final_goal_achieved))
    y = resource_usage(traj)
    return max(0.0, w.w1 + w.w2 * x - w.w3 * y)


def distance_score(traj: Trajectory, final: GoalSpec, w: ScoreWeights = ScoreWeights()) -> float:
    """Terminal plain-Euclidean distance to the final targets with a resource penalty.

    Unlike the achievement distance this ignores the goal's scale; lower is
    better.
    """
    diff = traj.states[-1, list(final.dims)] - final.targets
    act_sq = float(np.sum(traj.actions * traj.actions))
    return float(np.sqrt(np.sum(diff * diff) + w.c * act_sq))
