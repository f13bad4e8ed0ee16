"""The compiled and pure kernels must agree on every episode: identical
random-stream consumption, identical branch decisions, states equal up to
accumulated rounding."""

import subprocess
import sys

import numpy as np
import pytest

from microgoals import backend
from microgoals.backend import compiled_available
from microgoals.core import GoalProgram, GoalSpec
from microgoals._kernel_py import pack_program
from microgoals import _kernel_py

from helpers import make_random_env, make_random_goal

needs_compiled = pytest.mark.skipif(not compiled_available(),
                                    reason="compiled kernel not built")


def random_program(rng, n):
    n_sub = int(rng.integers(0, 3))
    subgoals = tuple(make_random_goal(rng, n) for _ in range(n_sub))
    final = GoalSpec(dims=tuple(range(n)),
                     targets=rng.uniform(-3, 3, size=n),
                     scale=np.exp(rng.uniform(-1, 1, size=n)),
                     threshold=float(rng.uniform(0.5, 3.0)))
    return GoalProgram(subgoals=subgoals, final=final)


def run_kernel(kernel_name, env, prog, s0, T, lam, nu, kappa, use_noise, seed):
    packed = pack_program(prog)
    n, m = env.B.shape
    states = np.empty((T + 1, n))
    actions = np.empty((T, m))
    active = np.empty(T, dtype=np.int64)
    achieved = np.empty(T, dtype=np.uint8)
    rng = np.random.default_rng(seed)
    if kernel_name == "compiled":
        from microgoals import _kernel_cy
        _kernel_cy.episode(env.A, env.B, s0, T, packed.dim_offsets,
                           packed.dims, packed.targets, packed.scale,
                           packed.thresholds, lam, nu, kappa, use_noise, rng,
                           states, actions, active, achieved)
    else:
        _kernel_py.episode(env.A, env.B, s0, T, packed, lam, nu, kappa,
                           use_noise, rng, states, actions, active, achieved)
    # one further draw witnesses that both kernels consumed the same stream
    return states, actions, active, achieved, rng.random()


@needs_compiled
class TestEpisodeEquivalence:
    def test_many_random_instances(self):
        rng = np.random.default_rng(14)
        for trial in range(120):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 6))
            env = make_random_env(rng, n, m)
            prog = random_program(rng, n)
            s0 = rng.uniform(-4, 4, size=n)
            T = int(rng.integers(1, 12))
            lam = float(rng.uniform(0.2, 1.8))
            use_noise = bool(rng.integers(0, 2))
            args = (env, prog, s0, T, lam, 0.1, 40.0, use_noise, 1000 + trial)
            s_py, a_py, act_py, ach_py, tail_py = run_kernel("python", *args)
            s_cy, a_cy, act_cy, ach_cy, tail_cy = run_kernel("compiled", *args)

            assert tail_py == tail_cy, f"stream drift on trial {trial}"
            assert act_py.tolist() == act_cy.tolist(), trial
            assert ach_py.tolist() == ach_cy.tolist(), trial
            norm = max(1.0, float(np.abs(s_py).max()))
            assert np.abs(s_py - s_cy).max() / norm < 1e-9, trial
            anorm = max(1.0, float(np.abs(a_py).max()))
            assert np.abs(a_py - a_cy).max() / anorm < 1e-9, trial

    def test_mean_gas_agreement(self, farm, farm_subgoals):
        prog = GoalProgram(subgoals=farm_subgoals, final=farm.final_goal)
        packed = pack_program(prog)
        lambdas = np.linspace(0.2, 1.8, 8)
        nus = np.full(8, 0.1)
        kappas = np.full(8, 40.0)
        flags = np.ones(8, dtype=np.uint8)
        from microgoals import _kernel_cy
        args = (farm.env.A, farm.env.B, farm.initial_state, farm.horizon)
        got_py = _kernel_py.mean_gas(*args, packed, lambdas, nus, kappas,
                                     flags, 3, 0.2, 0.3, 0.005,
                                     np.random.default_rng(5))
        got_cy = _kernel_cy.mean_gas(*args, packed.dim_offsets, packed.dims,
                                     packed.targets, packed.scale,
                                     packed.thresholds, lambdas, nus, kappas,
                                     flags, 3, 0.2, 0.3, 0.005,
                                     np.random.default_rng(5))
        assert got_py == pytest.approx(got_cy, rel=1e-9)


@needs_compiled
class TestSamplerStreams:
    def test_von_mises_stream_identical(self):
        from microgoals import _kernel_cy
        g1, g2 = np.random.default_rng(3), np.random.default_rng(3)
        ours = [_kernel_py.randkit.von_mises(g1, 40.0) for _ in range(500)]
        theirs = list(_kernel_cy.von_mises_draws(g2, 40.0, 500))
        assert ours == theirs

    def test_exponential_stream_identical(self):
        from microgoals import _kernel_cy
        g1, g2 = np.random.default_rng(4), np.random.default_rng(4)
        ours = [_kernel_py.randkit.exponential(g1, 0.1) for _ in range(500)]
        theirs = list(_kernel_cy.exponential_draws(g2, 0.1, 500))
        assert ours == theirs

    def test_normal_stream_identical(self):
        from microgoals import _kernel_cy
        g1, g2 = np.random.default_rng(5), np.random.default_rng(5)
        ours = list(_kernel_py.randkit.normal_vector(g1, 500))
        theirs = list(_kernel_cy.normal_draws(g2, 500))
        assert ours == theirs


class TestBackendSelection:
    def test_active_backend_reports_a_known_name(self):
        assert backend.active_backend() in ("python", "compiled")

    def test_env_var_forces_python(self):
        code = ("import microgoals.backend as b; print(b.active_backend())")
        out = subprocess.run([sys.executable, "-c", code],
                             env={"PATH": "/usr/bin:/bin",
                                  "MICROGOALS_BACKEND": "python"},
                             capture_output=True, text=True)
        assert out.stdout.strip() == "python"

    def test_env_var_rejects_unknown_value(self):
        code = "import microgoals.backend"
        out = subprocess.run([sys.executable, "-c", code],
                             env={"PATH": "/usr/bin:/bin",
                                  "MICROGOALS_BACKEND": "turbo"},
                             capture_output=True, text=True)
        assert out.returncode != 0
        assert "MICROGOALS_BACKEND" in out.stderr

    def test_contiguous_state_validation(self):
        with pytest.raises(ValueError, match="length"):
            backend.contiguous_state([1.0, 2.0], 3)
        with pytest.raises(ValueError, match="finite"):
            backend.contiguous_state([1.0, np.nan, 3.0], 3)
