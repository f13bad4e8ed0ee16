"""Resource-rational hill-climbing agents.

Each agent acts on the currently active goal by moving against the gradient
of the weighted goal distance, scaled by an individual step multiplier, with
optional angular and length noise applied to the resulting action vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernel_py, backend, randkit
from .core import Environment, GoalProgram, GoalSpec, Trajectory


class ZeroResidualError(ValueError):
    """Raised when the goal distance is zero and the gradient is undefined."""


@dataclass(frozen=True)
class NoiseParams:
    """Action-noise parameters.

    distance_intensity is the mean of the exponential length perturbation;
    angular_concentration is the von Mises kappa of the angular perturbation.
    """

    distance_intensity: float = 0.1
    angular_concentration: float = 40.0

    def __post_init__(self) -> None:
        if not (self.distance_intensity > 0.0 and np.isfinite(self.distance_intensity)):
            raise ValueError("distance_intensity must be positive and finite")
        if not (self.angular_concentration > 0.0 and np.isfinite(self.angular_concentration)):
            raise ValueError("angular_concentration must be positive and finite")


@dataclass(frozen=True)
class HillClimbAgent:
    """One agent: a step multiplier plus noise settings."""

    step_multiplier: float
    noise: NoiseParams = field(default_factory=NoiseParams)
    enable_noise: bool = True

    def __post_init__(self) -> None:
        if not (self.step_multiplier > 0.0 and np.isfinite(self.step_multiplier)):
            raise ValueError("step_multiplier must be positive and finite")


@dataclass(frozen=True)
class AgentPopulation:
    """A population of agents ordered by ascending step multiplier."""

    agents: tuple[HillClimbAgent, ...]

    def __post_init__(self) -> None:
        if len(self.agents) == 0:
            raise ValueError("population must contain at least one agent")
        lams = [a.step_multiplier for a in self.agents]
        if any(b < a for a, b in zip(lams, lams[1:])):
            raise ValueError("agents must be ordered by ascending step_multiplier")

    @property
    def size(self) -> int:
        return len(self.agents)

    @property
    def step_multipliers(self) -> np.ndarray:
        return np.array([a.step_multiplier for a in self.agents])


def _check_state(env: Environment, state) -> np.ndarray:
    s = np.ascontiguousarray(state, dtype=np.float64)
    if s.shape != (env.n_states,):
        raise ValueError(
            f"state must have length {env.n_states}, got shape {s.shape}"
        )
    if not np.all(np.isfinite(s)):
        raise ValueError("state must contain only finite values")
    return s


def _goal_arrays(goal: GoalSpec):
    return (np.asarray(goal.dims, dtype=np.int64),
            np.asarray(goal.targets, dtype=np.float64),
            np.asarray(goal.scale, dtype=np.float64))


def goal_gradient(env: Environment, state, goal: GoalSpec) -> np.ndarray:
    """Gradient of the weighted goal distance after one step, at zero action.

    Differentiates d(a) = ||(A s + B a)_dims - targets||_scale with respect to
    the action a, evaluated at a = 0.  Raises ZeroResidualError when the
    drifted state already sits exactly on the goal point.
    """
    s = _check_state(env, state)
    dims, targets, scale = _goal_arrays(goal)
    if dims.max() >= env.n_states:
        raise ValueError("goal dims exceed environment state count")
    grad, _, _ = _kernel_py.gradient_raw(env.A, env.B, s, dims, targets, scale)
    if grad is None:
        raise ZeroResidualError(
            "goal distance is zero at the drifted state; gradient undefined"
        )
    return grad


def optimal_step_size(env: Environment, state, goal: GoalSpec, direction) -> float:
    """Distance-minimizing step length along a unit direction, clamped at zero."""
    s = _check_state(env, state)
    u = np.ascontiguousarray(direction, dtype=np.float64)
    if u.shape != (env.n_actions,):
        raise ValueError(
            f"direction must have length {env.n_actions}, got shape {u.shape}"
        )
    norm = float(np.linalg.norm(u))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"direction must be a unit vector, got norm {norm}")
    dims, targets, scale = _goal_arrays(goal)
    if dims.max() >= env.n_states:
        raise ValueError("goal dims exceed environment state count")
    residual = (env.A @ s)[dims] - targets
    return _kernel_py.optimal_step_raw(env.B, dims, scale, residual, u)


def ideal_action(env: Environment, state, goal: GoalSpec, agent: HillClimbAgent) -> np.ndarray:
    """Noise-free action: step_multiplier times the optimal step against the gradient.

    Returns the zero vector when the residual is zero or the gradient has no
    action authority.
    """
    s = _check_state(env, state)
    dims, targets, scale = _goal_arrays(goal)
    if dims.max() >= env.n_states:
        raise ValueError("goal dims exceed environment state count")
    return _kernel_py.ideal_action_raw(env.A, env.B, s, dims, targets, scale,
                                       agent.step_multiplier)


def sample_von_mises(concentration: float, rng) -> float:
    """One draw from a zero-mean von Mises distribution, in (-pi, pi]."""
    if not (concentration > 0.0 and np.isfinite(concentration)):
        raise ValueError("concentration must be positive and finite")
    return randkit.von_mises(randkit.as_generator(rng), concentration)


def perturb_action(action, noise: NoiseParams, rng) -> np.ndarray:
    """Apply angular then length noise to an action; zero actions pass through."""
    a = np.ascontiguousarray(action, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("action must be a nonempty 1-d vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("action must contain only finite values")
    if not np.any(a):
        return a.copy()
    return _kernel_py.perturb_raw(a, noise.distance_intensity,
                                  noise.angular_concentration,
                                  randkit.as_generator(rng))


def run_episode(env: Environment, agent: HillClimbAgent, program: GoalProgram,
                initial_state, horizon: int, rng) -> Trajectory:
    """Simulate one episode and return its trajectory.

    At the start of each round every still-active subgoal that the current
    state satisfies is retired, in program order; the agent then acts on the
    first unretired goal (the final goal once all subgoals are retired).
    """
    if int(horizon) != horizon or horizon < 1:
        raise ValueError("horizon must be a positive integer")
    horizon = int(horizon)
    if program.final.dims[-1] >= env.n_states or any(
        g.dims[-1] >= env.n_states for g in program.subgoals
    ):
        raise ValueError("goal dims exceed environment state count")
    s0 = backend.contiguous_state(initial_state, env.n_states)
    prog = _kernel_py.pack_program(program)
    states = np.empty((horizon + 1, env.n_states))
    actions = np.empty((horizon, env.n_actions))
    active = np.empty(horizon, dtype=np.int64)
    achieved = np.empty(horizon, dtype=np.uint8)
    backend.episode(env.A, env.B, s0, horizon, prog, agent.step_multiplier,
                    agent.noise.distance_intensity,
                    agent.noise.angular_concentration, agent.enable_noise,
                    randkit.as_generator(rng), states, actions, active, achieved)
    return Trajectory(states=states, actions=actions,
                      final_goal_achieved=achieved.astype(bool),
                      active_goal_index=active)


def make_population(step_multipliers, noise: NoiseParams | None = None,
                    enable_noise: bool = True) -> AgentPopulation:
    """Build a population from step multipliers, sorted ascending."""
    lams = sorted(float(x) for x in np.asarray(step_multipliers, dtype=np.float64))
    if len(lams) == 0:
        raise ValueError("at least one step multiplier is required")
    noise = noise if noise is not None else NoiseParams()
    return AgentPopulation(tuple(
        HillClimbAgent(step_multiplier=lam, noise=noise, enable_noise=enable_noise)
        for lam in lams
    ))


def default_population(size: int = 30, low: float = 0.2, high: float = 1.8,
                       noise: NoiseParams | None = None,
                       enable_noise: bool = True) -> AgentPopulation:
    """Evenly spaced step multipliers over [low, high]."""
    if size < 1:
        raise ValueError("size must be positive")
    return make_population(np.linspace(low, high, size), noise=noise,
                           enable_noise=enable_noise)


def population_arrays(population: AgentPopulation):
    """Flat per-agent parameter arrays for the batched kernels."""
    n = population.size
    lams = np.empty(n)
    nus = np.empty(n)
    kappas = np.empty(n)
    flags = np.empty(n, dtype=np.uint8)
    for i, a in enumerate(population.agents):
        lams[i] = a.step_multiplier
        nus[i] = a.noise.distance_intensity
        kappas[i] = a.noise.angular_concentration
        flags[i] = 1 if a.enable_noise else 0
    return lams, nus, kappas, flags
