"""Episode-kernel backend selection.

The compiled Cython kernel is used when its extension imported successfully;
otherwise the pure-numpy fallback takes over.  ``MICROGOALS_BACKEND=python``
or ``=compiled`` forces the choice (the latter raises if the extension is
missing).  Both kernels consume the same random stream and implement the same
semantics, so results are interchangeable up to floating-point rounding.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernel_py
from ._kernel_py import PackedProgram, pack_program

try:
    from . import _kernel_cy
except ImportError:
    _kernel_cy = None

_forced = os.environ.get("MICROGOALS_BACKEND")
if _forced not in (None, "", "python", "compiled"):
    raise ValueError(
        f"MICROGOALS_BACKEND must be 'python' or 'compiled', got {_forced!r}"
    )
if _forced == "compiled" and _kernel_cy is None:
    raise ImportError(
        "MICROGOALS_BACKEND=compiled but the microgoals._kernel_cy extension "
        "is not built; install with the Cython extension or unset the variable"
    )

_use_compiled = _kernel_cy is not None and _forced != "python"


def active_backend() -> str:
    """Name of the kernel in use: 'compiled' or 'python'."""
    return "compiled" if _use_compiled else "python"


def compiled_available() -> bool:
    return _kernel_cy is not None


def episode(A, B, s0, T, prog: PackedProgram, lam, nu, kappa, use_noise, rng,
            states, actions, active, achieved) -> None:
    """Run one episode into preallocated arrays (achieved is uint8)."""
    if _use_compiled:
        _kernel_cy.episode(A, B, s0, T, prog.dim_offsets, prog.dims, prog.targets,
                           prog.scale, prog.thresholds, lam, nu, kappa, use_noise,
                           rng, states, actions, active, achieved)
    else:
        _kernel_py.episode(A, B, s0, T, prog, lam, nu, kappa, use_noise, rng,
                           states, actions, active, achieved)


def mean_gas(A, B, s0, T, prog: PackedProgram, lambdas, nus, kappas, noise_flags,
             rollouts, w1, w2, w3, rng) -> float:
    """Mean goal-achievement score over agents x rollouts episodes."""
    if _use_compiled:
        return _kernel_cy.mean_gas(A, B, s0, T, prog.dim_offsets, prog.dims,
                                   prog.targets, prog.scale, prog.thresholds,
                                   lambdas, nus, kappas, noise_flags, rollouts,
                                   w1, w2, w3, rng)
    return _kernel_py.mean_gas(A, B, s0, T, prog, lambdas, nus, kappas,
                               noise_flags, rollouts, w1, w2, w3, rng)


def contiguous_state(s0, n: int) -> np.ndarray:
    s0 = np.ascontiguousarray(s0, dtype=np.float64)
    if s0.shape != (n,):
        raise ValueError(f"initial state must have length {n}, got shape {s0.shape}")
    if not np.all(np.isfinite(s0)):
        raise ValueError("initial state must contain only finite values")
    return s0
