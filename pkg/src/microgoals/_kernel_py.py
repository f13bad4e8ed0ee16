"""Pure-numpy episode kernel (fallback backend).

Implements the hill-climbing episode loop over a packed goal program.  The
compiled kernel in ``_kernel_cy`` mirrors this file operation for operation,
drawing from the same bit-generator stream, so the two backends agree on
every trajectory; keep them in lockstep when changing semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import randkit

# Residuals with weighted distance below this leave the gradient undefined;
# the agent emits the zero action for the round.
ZERO_RESIDUAL_TOL = 1e-9
# Directions moving the goal dimensions less than this have no usable effect.
NO_EFFECT_TOL = 1e-12


@dataclass(frozen=True)
class PackedProgram:
    """Flat-array view of a GoalProgram, shared by both kernels.

    Goal g occupies dims[dim_offsets[g]:dim_offsets[g+1]] (and the matching
    slices of targets/scale).  The last goal is the final goal over all N
    dimensions.
    """

    n_goals: int
    dim_offsets: np.ndarray
    dims: np.ndarray
    targets: np.ndarray
    scale: np.ndarray
    thresholds: np.ndarray

    def slice(self, g: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        lo, hi = self.dim_offsets[g], self.dim_offsets[g + 1]
        return (
            self.dims[lo:hi],
            self.targets[lo:hi],
            self.scale[lo:hi],
            float(self.thresholds[g]),
        )


def pack_program(program) -> PackedProgram:
    goals = program.goals
    offsets = np.zeros(len(goals) + 1, dtype=np.int64)
    for g, goal in enumerate(goals):
        offsets[g + 1] = offsets[g] + goal.n_dims
    dims = np.concatenate([np.asarray(g.dims, dtype=np.int64) for g in goals])
    targets = np.concatenate([g.targets for g in goals])
    scale = np.concatenate([g.scale for g in goals])
    thresholds = np.array([g.threshold for g in goals], dtype=float)
    return PackedProgram(len(goals), offsets, dims, targets, scale, thresholds)


def weighted_distance_raw(s, dims, targets, scale) -> float:
    diff = s[dims] - targets
    return math.sqrt(float(np.sum(scale * diff * diff)))


def gradient_raw(A, B, s, dims, targets, scale):
    """Gradient of the weighted post-drift distance w.r.t. the action at a=0.

    Returns (gradient, drift_residual, distance); gradient is None when the
    distance is within ZERO_RESIDUAL_TOL (already at the goal after drift).
    """
    r = (A @ s)[dims] - targets
    d0 = math.sqrt(float(np.sum(scale * r * r)))
    if d0 < ZERO_RESIDUAL_TOL:
        return None, r, d0
    grad = B[dims].T @ (scale * r) / d0
    return grad, r, d0


def optimal_step_raw(B, dims, scale, residual, direction) -> float:
    """Distance-minimizing step length along a unit direction, clamped at 0."""
    bu = B[dims] @ direction
    if math.sqrt(float(np.sum(bu * bu))) < NO_EFFECT_TOL:
        return 0.0
    sb = scale * bu
    t = -float(np.dot(residual, sb)) / float(np.dot(bu, sb))
    return max(t, 0.0)


def ideal_action_raw(A, B, s, dims, targets, scale, lam) -> np.ndarray:
    """Noise-free hill-climbing action: lam * t_opt along the descent direction."""
    m = B.shape[1]
    grad, r, _ = gradient_raw(A, B, s, dims, targets, scale)
    if grad is None:
        return np.zeros(m)
    gn = math.sqrt(float(np.sum(grad * grad)))
    if gn < NO_EFFECT_TOL:
        # Residual present but unreachable along any action direction.
        return np.zeros(m)
    u = -grad / gn
    t = optimal_step_raw(B, dims, scale, r, u)
    return (lam * t) * u


def perturb_raw(a: np.ndarray, nu: float, kappa: float, rng) -> np.ndarray:
    """Rotate a nonzero action by a von Mises angle, then add exponential length noise."""
    m = a.shape[0]
    theta = randkit.von_mises(rng, kappa)
    norm_a = math.sqrt(float(np.sum(a * a)))
    if m == 1:
        out = a.copy() if abs(theta) <= math.pi / 2 else -a
    else:
        a_hat = a / norm_a
        while True:
            z = randkit.normal_vector(rng, m)
            z_perp = z - float(np.dot(z, a_hat)) * a_hat
            zn = math.sqrt(float(np.sum(z_perp * z_perp)))
            if zn > NO_EFFECT_TOL:
                break
        e = z_perp / zn
        out = math.cos(theta) * a + (math.sin(theta) * norm_a) * e
    eta = randkit.exponential(rng, nu)
    return out * ((norm_a + eta) / norm_a)


def episode(A, B, s0, T, prog: PackedProgram, lam, nu, kappa, use_noise, rng,
            states, actions, active, achieved) -> None:
    """Run one episode, writing into the preallocated output arrays.

    states: (T+1, N), actions: (T, M), active: (T,), achieved: (T,).
    """
    fdims, ftargets, fscale, fthr = prog.slice(prog.n_goals - 1)
    s = np.array(s0, dtype=float)
    states[0] = s
    ptr = 0
    for t in range(T):
        # Retire every already-satisfied subgoal before acting (round-0 check
        # included); retirement is permanent.
        while ptr < prog.n_goals - 1:
            gdims, gtargets, gscale, gthr = prog.slice(ptr)
            if weighted_distance_raw(s, gdims, gtargets, gscale) <= gthr:
                ptr += 1
            else:
                break
        active[t] = ptr
        gdims, gtargets, gscale, _ = prog.slice(ptr)
        a = ideal_action_raw(A, B, s, gdims, gtargets, gscale, lam)
        if use_noise and np.any(a != 0.0):
            a = perturb_raw(a, nu, kappa, rng)
        s = A @ s + B @ a
        states[t + 1] = s
        actions[t] = a
        achieved[t] = weighted_distance_raw(s, fdims, ftargets, fscale) <= fthr


def mean_gas(A, B, s0, T, prog: PackedProgram, lambdas, nus, kappas, noise_flags,
             rollouts, w1, w2, w3, rng) -> float:
    """Mean goal-achievement score over every (agent, rollout) episode.

    Episodes run in a fixed order (agents as given, rollouts inner) off the
    single supplied stream.
    """
    n, m = B.shape
    states = np.empty((T + 1, n))
    actions = np.empty((T, m))
    active = np.empty(T, dtype=np.int64)
    achieved = np.empty(T, dtype=bool)
    total = 0.0
    for i in range(len(lambdas)):
        for _ in range(rollouts):
            episode(A, B, s0, T, prog, lambdas[i], nus[i], kappas[i],
                    bool(noise_flags[i]), rng, states, actions, active, achieved)
            x = int(np.sum(achieved))
            y = float(np.sum(np.abs(actions)))
            total += max(0.0, w1 + w2 * x - w3 * y)
    return total / (len(lambdas) * rollouts)
