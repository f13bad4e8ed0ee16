# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled episode kernel.

Mirror of ``_kernel_py`` operation for operation, including the explicit
samplers (Box-Muller, inverse-CDF exponential, Best-Fisher von Mises) drawn
from the same PCG64 ``next_double`` stream, so both backends produce the same
trajectories from the same seed.  Any semantic change must land in both files.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport M_PI, acos, cos, fabs, fmax, fmin, log, log1p, sin, sqrt
from libc.stdint cimport int64_t
from numpy.random cimport bitgen_t

import numpy as np

backend_name = "compiled"

DEF ZERO_RESIDUAL_TOL = 1e-9
DEF NO_EFFECT_TOL = 1e-12


cdef bitgen_t *_get_bitgen(obj) except NULL:
    bg = getattr(obj, "bit_generator", obj)
    capsule = bg.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("expected a numpy Generator or BitGenerator")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


# ---------------------------------------------------------------------------
# samplers (keep identical to randkit.py)

cdef inline double _uniform(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _exponential(bitgen_t *rng, double mean) noexcept nogil:
    return -mean * log1p(-rng.next_double(rng.state))


cdef void _normal_fill(bitgen_t *rng, double *out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i = 0
    cdef double u1, u2, r, a
    while i < n:
        u1 = rng.next_double(rng.state)
        u2 = rng.next_double(rng.state)
        r = sqrt(-2.0 * log1p(-u1))
        a = 2.0 * M_PI * u2
        out[i] = r * cos(a)
        if i + 1 < n:
            out[i + 1] = r * sin(a)
        i += 2


cdef double _von_mises(bitgen_t *rng, double kappa) noexcept nogil:
    cdef double tau, rho, r, u1, u2, u3, z, f, c, theta
    tau = 1.0 + sqrt(1.0 + 4.0 * kappa * kappa)
    rho = (tau - sqrt(2.0 * tau)) / (2.0 * kappa)
    r = (1.0 + rho * rho) / (2.0 * rho)
    while True:
        u1 = rng.next_double(rng.state)
        u2 = rng.next_double(rng.state)
        z = cos(M_PI * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        if c * (2.0 - c) - u2 > 0.0:
            break
        if u2 <= 0.0 or log(c / u2) + 1.0 - c >= 0.0:
            break
    u3 = rng.next_double(rng.state)
    theta = acos(fmin(1.0, fmax(-1.0, f)))
    return theta if u3 >= 0.5 else -theta


# ---------------------------------------------------------------------------
# episode core

cdef double _weighted_distance(const double *s, const int64_t *dims,
                               const double *targets, const double *scale,
                               Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0, diff
    for k in range(d):
        diff = s[dims[k]] - targets[k]
        acc += scale[k] * diff * diff
    return sqrt(acc)


cdef void _episode_core(
    const double[:, ::1] A, const double[:, ::1] B,
    const double[::1] s0, Py_ssize_t T,
    const int64_t[::1] dim_offsets, const int64_t[::1] dims,
    const double[::1] targets, const double[::1] scale,
    const double[::1] thresholds,
    double lam, double nu, double kappa, bint use_noise,
    bitgen_t *rng,
    double[:, ::1] states, double[:, ::1] actions,
    int64_t[::1] active, unsigned char[::1] achieved,
    double *s, double *drift, double *a, double *grad, double *z,
) noexcept nogil:
    cdef Py_ssize_t N = A.shape[0]
    cdef Py_ssize_t M = B.shape[1]
    cdef Py_ssize_t n_goals = dim_offsets.shape[0] - 1
    cdef Py_ssize_t flo = dim_offsets[n_goals - 1]
    cdef Py_ssize_t fd = dim_offsets[n_goals] - flo
    cdef Py_ssize_t ptr = 0
    cdef Py_ssize_t t, i, j, k, lo, d
    cdef double d0, acc, gn, bnorm, num, den, bu, tstep
    cdef double theta, norm_a, dot, zn, ct, st, eta, factor
    cdef bint nonzero

    for i in range(N):
        s[i] = s0[i]
        states[0, i] = s[i]

    for t in range(T):
        while ptr < n_goals - 1:
            lo = dim_offsets[ptr]
            d = dim_offsets[ptr + 1] - lo
            if _weighted_distance(s, &dims[lo], &targets[lo], &scale[lo], d) <= thresholds[ptr]:
                ptr += 1
            else:
                break
        active[t] = ptr
        lo = dim_offsets[ptr]
        d = dim_offsets[ptr + 1] - lo

        for i in range(N):
            acc = 0.0
            for j in range(N):
                acc += A[i, j] * s[j]
            drift[i] = acc

        # residual and weighted distance after drift
        d0 = 0.0
        for k in range(d):
            acc = drift[dims[lo + k]] - targets[lo + k]
            # reuse grad[] later; store residual in z[] temporarily? keep local
            z[k] = acc  # z doubles as residual scratch (length >= max(M, N))
            d0 += scale[lo + k] * acc * acc
        d0 = sqrt(d0)

        for j in range(M):
            a[j] = 0.0

        if d0 >= ZERO_RESIDUAL_TOL:
            gn = 0.0
            for j in range(M):
                acc = 0.0
                for k in range(d):
                    acc += B[dims[lo + k], j] * scale[lo + k] * z[k]
                grad[j] = acc / d0
                gn += grad[j] * grad[j]
            gn = sqrt(gn)
            if gn >= NO_EFFECT_TOL:
                for j in range(M):
                    grad[j] = -grad[j] / gn  # grad now holds the unit direction
                bnorm = 0.0
                num = 0.0
                den = 0.0
                for k in range(d):
                    bu = 0.0
                    for j in range(M):
                        bu += B[dims[lo + k], j] * grad[j]
                    bnorm += bu * bu
                    num += z[k] * scale[lo + k] * bu
                    den += bu * scale[lo + k] * bu
                if sqrt(bnorm) >= NO_EFFECT_TOL:
                    tstep = fmax(-num / den, 0.0)
                    for j in range(M):
                        a[j] = (lam * tstep) * grad[j]

        if use_noise:
            nonzero = False
            for j in range(M):
                if a[j] != 0.0:
                    nonzero = True
                    break
            if nonzero:
                theta = _von_mises(rng, kappa)
                norm_a = 0.0
                for j in range(M):
                    norm_a += a[j] * a[j]
                norm_a = sqrt(norm_a)
                if M == 1:
                    if fabs(theta) > M_PI / 2:
                        a[0] = -a[0]
                else:
                    # grad[] is free again; it holds the unit action direction
                    for j in range(M):
                        grad[j] = a[j] / norm_a
                    while True:
                        _normal_fill(rng, z, M)
                        dot = 0.0
                        for j in range(M):
                            dot += z[j] * grad[j]
                        zn = 0.0
                        for j in range(M):
                            z[j] = z[j] - dot * grad[j]
                            zn += z[j] * z[j]
                        zn = sqrt(zn)
                        if zn > NO_EFFECT_TOL:
                            break
                    ct = cos(theta)
                    st = sin(theta) * norm_a
                    for j in range(M):
                        a[j] = ct * a[j] + st * (z[j] / zn)
                eta = _exponential(rng, nu)
                factor = (norm_a + eta) / norm_a
                for j in range(M):
                    a[j] = a[j] * factor

        for i in range(N):
            acc = drift[i]
            for j in range(M):
                acc += B[i, j] * a[j]
            s[i] = acc
            states[t + 1, i] = acc
        for j in range(M):
            actions[t, j] = a[j]
        achieved[t] = _weighted_distance(s, &dims[flo], &targets[flo], &scale[flo], fd) <= thresholds[n_goals - 1]


def episode(A, B, s0, Py_ssize_t T, dim_offsets, dims, targets, scale, thresholds,
            double lam, double nu, double kappa, bint use_noise, rng,
            states, actions, active, achieved):
    """Run one episode into the preallocated output arrays."""
    cdef bitgen_t *bitgen = _get_bitgen(rng)
    cdef const double[:, ::1] A_v = A
    cdef const double[:, ::1] B_v = B
    cdef const double[::1] s0_v = s0
    cdef const int64_t[::1] off_v = dim_offsets
    cdef const int64_t[::1] dims_v = dims
    cdef const double[::1] tgt_v = targets
    cdef const double[::1] scl_v = scale
    cdef const double[::1] thr_v = thresholds
    cdef double[:, ::1] states_v = states
    cdef double[:, ::1] actions_v = actions
    cdef int64_t[::1] active_v = active
    cdef unsigned char[::1] achieved_v = achieved
    cdef Py_ssize_t N = A_v.shape[0], M = B_v.shape[1]
    cdef Py_ssize_t mx = max(N, M)
    scratch = np.empty(2 * N + 3 * mx, dtype=np.float64)
    cdef double[::1] sc = scratch
    with nogil:
        _episode_core(A_v, B_v, s0_v, T, off_v, dims_v, tgt_v, scl_v, thr_v,
                      lam, nu, kappa, use_noise, bitgen,
                      states_v, actions_v, active_v, achieved_v,
                      &sc[0], &sc[N], &sc[2 * N], &sc[2 * N + mx],
                      &sc[2 * N + 2 * mx])


def mean_gas(A, B, s0, Py_ssize_t T, dim_offsets, dims, targets, scale, thresholds,
             lambdas, nus, kappas, noise_flags, Py_ssize_t rollouts,
             double w1, double w2, double w3, rng):
    """Mean goal-achievement score over every (agent, rollout) episode."""
    cdef bitgen_t *bitgen = _get_bitgen(rng)
    cdef const double[:, ::1] A_v = A
    cdef const double[:, ::1] B_v = B
    cdef const double[::1] s0_v = s0
    cdef const int64_t[::1] off_v = dim_offsets
    cdef const int64_t[::1] dims_v = dims
    cdef const double[::1] tgt_v = targets
    cdef const double[::1] scl_v = scale
    cdef const double[::1] thr_v = thresholds
    cdef const double[::1] lam_v = lambdas
    cdef const double[::1] nu_v = nus
    cdef const double[::1] kap_v = kappas
    cdef const unsigned char[::1] nz_v = noise_flags
    cdef Py_ssize_t N = A_v.shape[0], M = B_v.shape[1]
    cdef Py_ssize_t n_agents = lam_v.shape[0]

    states = np.empty((T + 1, N), dtype=np.float64)
    actions = np.empty((T, M), dtype=np.float64)
    active = np.empty(T, dtype=np.int64)
    achieved = np.empty(T, dtype=np.uint8)
    scratch = np.empty(2 * N + 3 * max(N, M), dtype=np.float64)
    cdef double[:, ::1] states_v = states
    cdef double[:, ::1] actions_v = actions
    cdef int64_t[::1] active_v = active
    cdef unsigned char[::1] achieved_v = achieved
    cdef double[::1] sc = scratch
    cdef Py_ssize_t i, rep, t, j, mx = max(N, M)
    cdef double total = 0.0, x, y

    with nogil:
        for i in range(n_agents):
            for rep in range(rollouts):
                _episode_core(A_v, B_v, s0_v, T, off_v, dims_v, tgt_v, scl_v, thr_v,
                              lam_v[i], nu_v[i], kap_v[i], nz_v[i], bitgen,
                              states_v, actions_v, active_v, achieved_v,
                              &sc[0], &sc[N], &sc[2 * N], &sc[2 * N + mx],
                              &sc[2 * N + 2 * mx])
                x = 0.0
                y = 0.0
                for t in range(T):
                    if achieved_v[t]:
                        x += 1.0
                    for j in range(M):
                        y += fabs(actions_v[t, j])
                total += fmax(0.0, w1 + w2 * x - w3 * y)
    return total / (n_agents * rollouts)


# ---------------------------------------------------------------------------
# stream hooks used by the backend-equivalence tests

def von_mises_draws(rng, double kappa, Py_ssize_t n):
    cdef bitgen_t *bitgen = _get_bitgen(rng)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t i
    for i in range(n):
        out_v[i] = _von_mises(bitgen, kappa)
    return out


def exponential_draws(rng, double mean, Py_ssize_t n):
    cdef bitgen_t *bitgen = _get_bitgen(rng)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t i
    for i in range(n):
        out_v[i] = _exponential(bitgen, mean)
    return out


def normal_draws(rng, Py_ssize_t n):
    cdef bitgen_t *bitgen = _get_bitgen(rng)
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    with nogil:
        _normal_fill(bitgen, &out_v[0], n)
    return out
