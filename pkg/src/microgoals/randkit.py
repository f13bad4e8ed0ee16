"""Samplers built on raw uniform draws.

Every draw here consumes doubles from ``Generator.random()`` only (one
``next_double`` per call on the underlying bit generator), with the sampling
algorithms spelled out explicitly.  The compiled kernel re-implements exactly
these algorithms against the same bit-generator stream, so both backends
produce identical draw sequences from the same seed; tests assert that.

Box-Muller for normals (fixed two uniforms per pair), inverse CDF for the
exponential, and the Best-Fisher rejection scheme for the von Mises.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["as_generator", "exponential", "normal_vector", "von_mises"]


def as_generator(rng) -> np.random.Generator:
    """Coerce a seed / SeedSequence / Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.PCG64(rng))


def exponential(rng: np.random.Generator, mean: float) -> float:
    """One exponential draw with the given mean, by inverse CDF."""
    if not (math.isfinite(mean) and mean > 0):
        raise ValueError("mean must be a positive finite number")
    # 1 - u is in (0, 1], so the log is finite.
    return -mean * math.log1p(-rng.random())


def _normal_pair(rng: np.random.Generator) -> tuple[float, float]:
    u1 = rng.random()
    u2 = rng.random()
    r = math.sqrt(-2.0 * math.log1p(-u1))
    a = 2.0 * math.pi * u2
    return r * math.cos(a), r * math.sin(a)


def normal_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    """n standard normal draws; always consumes ceil(n/2) Box-Muller pairs."""
    out = np.empty(n)
    i = 0
    while i < n:
        z1, z2 = _normal_pair(rng)
        out[i] = z1
        if i + 1 < n:
            out[i + 1] = z2
        i += 2
    return out


def von_mises(rng: np.random.Generator, kappa: float) -> float:
    """One draw from von Mises(mu=0, kappa), kappa > 0.

    Best & Fisher (1979) rejection sampling from a wrapped Cauchy envelope;
    expected O(1) proposals for any concentration.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    tau = 1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)
    rho = (tau - math.sqrt(2.0 * tau)) / (2.0 * kappa)
    r = (1.0 + rho * rho) / (2.0 * rho)
    while True:
        u1 = rng.random()
        u2 = rng.random()
        z = math.cos(math.pi * u1)
        f = (1.0 + r * z) / (r + z)
        c = kappa * (r - f)
        if c * (2.0 - c) - u2 > 0.0:
            break
        # u2 == 0 accepts: the log criterion is +inf there.
        if u2 <= 0.0 or math.log(c / u2) + 1.0 - c >= 0.0:
            break
    u3 = rng.random()
    theta = math.acos(min(1.0, max(-1.0, f)))
    return theta if u3 >= 0.5 else -theta
