"""Independent oracles and instance generators shared across test modules."""

from __future__ import annotations

import math

import numpy as np

from microgoals.core import Environment, GoalSpec, weighted_distance


def make_random_env(rng: np.random.Generator, n: int, m: int) -> Environment:
    return Environment(
        state_names=tuple(f"s{i}" for i in range(n)),
        action_names=tuple(f"a{j}" for j in range(m)),
        A=rng.uniform(-1.0, 1.0, size=(n, n)),
        B=rng.uniform(-1.0, 1.0, size=(n, m)),
    )


def make_random_goal(rng: np.random.Generator, n: int,
                     d: int | None = None) -> GoalSpec:
    if d is None:
        d = int(rng.integers(1, n + 1))
    dims = tuple(sorted(rng.choice(n, size=d, replace=False).tolist()))
    return GoalSpec(
        dims=dims,
        targets=rng.uniform(-5.0, 5.0, size=d),
        scale=np.exp(rng.uniform(math.log(0.05), math.log(5.0), size=d)),
        threshold=float(rng.uniform(0.5, 2.0)),
    )


def post_step_distance(env: Environment, state: np.ndarray,
                       goal: GoalSpec, action: np.ndarray) -> float:
    """The objective the gradient and step size refer to: distance after one
    round of dynamics under the given action."""
    return weighted_distance(env.A @ state + env.B @ action, goal)


def central_difference_gradient(env: Environment, state: np.ndarray,
                                goal: GoalSpec, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of the post-step distance at a = 0."""
    m = env.n_actions
    grad = np.empty(m)
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        grad[j] = (post_step_distance(env, state, goal, e)
                   - post_step_distance(env, state, goal, -e)) / (2.0 * h)
    return grad


def golden_section_minimize(f, lo: float, hi: float,
                            tol: float = 1e-10) -> float:
    """Golden-section search for the minimizer of a unimodal f on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0
