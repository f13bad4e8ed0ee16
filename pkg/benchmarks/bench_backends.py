"""Time the compiled episode kernels against the pure-python fallback.

Both kernels draw from identical random streams, so each workload first
checks that the backends agree on the numbers and then reports per-call
timings on the packaged farm task.

Usage: python3 benchmarks/bench_backends.py [--episodes N] [--evaluations N]
"""

import argparse
import time

import numpy as np

from microgoals import _kernel_py
from microgoals.agents import default_population, population_arrays
from microgoals.core import GoalProgram
from microgoals.envfile import (default_environment_path, load_environment,
                                subgoals_from_file)

try:
    from microgoals import _kernel_cy
except ImportError:
    _kernel_cy = None


def episode_once(kernel, env, prog, s0, T, agent, rng, states, actions,
                 active, achieved):
    if kernel is _kernel_py:
        kernel.episode(env.A, env.B, s0, T, prog, agent.step_multiplier,
                       agent.noise.distance_intensity,
                       agent.noise.angular_concentration, agent.enable_noise,
                       rng, states, actions, active, achieved)
    else:
        kernel.episode(env.A, env.B, s0, T, prog.dim_offsets, prog.dims,
                       prog.targets, prog.scale, prog.thresholds,
                       agent.step_multiplier, agent.noise.distance_intensity,
                       agent.noise.angular_concentration, agent.enable_noise,
                       rng, states, actions, active, achieved)


def mean_gas_once(kernel, env, prog, s0, T, arrays, rollouts, rng):
    lams, nus, kappas, flags = arrays
    if kernel is _kernel_py:
        return kernel.mean_gas(env.A, env.B, s0, T, prog, lams, nus, kappas,
                               flags, rollouts, 0.2, 0.3, 0.005, rng)
    return kernel.mean_gas(env.A, env.B, s0, T, prog.dim_offsets, prog.dims,
                           prog.targets, prog.scale, prog.thresholds, lams,
                           nus, kappas, flags, rollouts, 0.2, 0.3, 0.005, rng)


def time_episodes(kernel, env, prog, s0, T, agent, repeats):
    states = np.empty((T + 1, env.n_states))
    actions = np.empty((T, env.n_actions))
    active = np.empty(T, dtype=np.int64)
    achieved = np.empty(T, dtype=np.uint8)
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    for _ in range(repeats):
        episode_once(kernel, env, prog, s0, T, agent, rng, states, actions,
                     active, achieved)
    elapsed = time.perf_counter() - start
    return elapsed / repeats, states[-1].copy()


def time_evaluations(kernel, env, prog, s0, T, arrays, rollouts, repeats):
    rng = np.random.default_rng(1)
    total = 0.0
    start = time.perf_counter()
    for _ in range(repeats):
        total += mean_gas_once(kernel, env, prog, s0, T, arrays, rollouts, rng)
    elapsed = time.perf_counter() - start
    return elapsed / repeats, total


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--episodes", type=int, default=2000,
                        help="episodes per backend for the episode workload")
    parser.add_argument("--evaluations", type=int, default=20,
                        help="mean-GAS evaluations per backend")
    args = parser.parse_args()

    cfg = load_environment(default_environment_path())
    subgoals = subgoals_from_file(default_environment_path().parent
                                  / "farm_subgoal.json")
    program = GoalProgram(subgoals=subgoals, final=cfg.final_goal)
    prog = _kernel_py.pack_program(program)
    s0 = np.ascontiguousarray(cfg.initial_state)
    T = cfg.horizon
    pop = default_population(size=30)
    agent = pop.agents[15]
    arrays = population_arrays(pop)

    kernels = [("python", _kernel_py)]
    if _kernel_cy is not None:
        kernels.append(("compiled", _kernel_cy))
    else:
        print("compiled extension not built; timing the python kernel only")

    results = {}
    for name, kernel in kernels:
        ep_time, final_state = time_episodes(kernel, cfg.env, prog, s0, T,
                                             agent, args.episodes)
        ev_time, total = time_evaluations(kernel, cfg.env, prog, s0, T,
                                          arrays, 10, args.evaluations)
        results[name] = (ep_time, final_state, ev_time, total)

    if len(results) == 2:
        py_state, cy_state = results["python"][1], results["compiled"][1]
        np.testing.assert_allclose(cy_state, py_state, rtol=1e-9, atol=1e-9)
        py_total, cy_total = results["python"][3], results["compiled"][3]
        np.testing.assert_allclose(cy_total, py_total, rtol=1e-9, atol=1e-9)
        print("agreement check passed: final states and mean-GAS totals "
              "match across backends\n")

    header = (f"{'workload':<28}" + "".join(f"{n:>12}" for n, _ in kernels)
              + ("{:>10}".format("speedup") if len(kernels) == 2 else ""))
    print(header)
    rows = [
        (f"episode (T={T}, noisy)", 0, 1e6, "us"),
        ("mean GAS (30 agents x 10)", 2, 1e3, "ms"),
    ]
    for label, idx, unit, suffix in rows:
        cells = "".join(f"{results[n][idx] * unit:>10.1f}{suffix}"
                        for n, _ in kernels)
        if len(kernels) == 2:
            ratio = results["python"][idx] / results["compiled"][idx]
            cells += f"{ratio:>9.1f}x"
        print(f"{label:<28}{cells}")


if __name__ == "__main__":
    main()
