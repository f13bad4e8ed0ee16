"""Batch evaluation and the statistics behind the condition comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend, randkit
from ._kernel_py import pack_program
from .agents import AgentPopulation, run_episode
from .core import (Environment, GoalProgram, ScoreWeights, Trajectory,
                   distance_score, goal_achievement_score, resource_usage)

_ALTERNATIVES = ("two-sided", "less", "greater")

# Exact Mann-Whitney enumeration is only attempted when the subset count
# stays below this; beyond it the normal approximation takes over even for
# small per-group sizes.
_EXACT_COMB_LIMIT = 500_000


@dataclass(frozen=True)
class BatchRow:
    """One (agent, rollout) episode's measurements."""

    step_multiplier: float
    seed: int
    gas: float
    ds: float
    resources: float
    rounds_final_achieved: int
    subgoal_achieved_round: int | None


@dataclass(frozen=True)
class BatchResult:
    """All rows of a population x rollouts evaluation."""

    rows: tuple[BatchRow, ...]
    horizon: int
    rollouts: int
    master_seed: int
    n_subgoals: int
    trajectories: tuple[Trajectory, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.rows) == 0:
            raise ValueError("batch must contain at least one row")
        if self.trajectories is not None and len(self.trajectories) != len(self.rows):
            raise ValueError("one trajectory per row when trajectories are kept")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def gas_values(self) -> np.ndarray:
        return self.column("gas")

    @property
    def ds_values(self) -> np.ndarray:
        return self.column("ds")

    @property
    def resource_values(self) -> np.ndarray:
        return self.column("resources")


@dataclass(frozen=True)
class TestResult:
    """A test statistic with its p-value and alternative."""

    # keeps pytest from collecting this as a test class
    __test__ = False

    statistic: float
    p_value: float
    alternative: str

    def __post_init__(self) -> None:
        if self.alternative not in _ALTERNATIVES:
            raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")


def subgoal_achieved_round(traj: Trajectory, n_subgoals: int) -> int | None:
    """First round whose action already pursued the final goal, or None.

    Retirement happens at the start of a round, so the returned index is the
    round at whose opening state every subgoal was satisfied. Programs with
    no subgoals return None.
    """
    if n_subgoals == 0:
        return None
    hits = np.nonzero(traj.active_goal_index >= n_subgoals)[0]
    return int(hits[0]) if hits.size else None


def run_batch(env: Environment, program: GoalProgram, pop: AgentPopulation,
              s0, T: int, rollouts_per_agent: int, master_seed: int,
              weights: ScoreWeights = ScoreWeights(),
              keep_trajectories: bool = False) -> BatchResult:
    """Run |pop| x rollouts episodes with deterministic per-row seeding.

    Rows are ordered agents-outer (population order), rollouts-inner. Row k
    runs on its own generator seeded from the master seed, so any row can be
    reproduced in isolation.
    """
    if rollouts_per_agent < 1:
        raise ValueError("rollouts_per_agent must be >= 1")
    n_rows = pop.size * rollouts_per_agent
    row_seeds = np.random.SeedSequence(int(master_seed)).generate_state(
        n_rows, np.uint64)
    rows: list[BatchRow] = []
    trajs: list[Trajectory] = []
    final = program.final
    n_sub = len(program.subgoals)
    k = 0
    for agent in pop.agents:
        for _ in range(rollouts_per_agent):
            seed = int(row_seeds[k])
            rng = np.random.Generator(np.random.PCG64(seed))
            traj = run_episode(env, agent, program, s0, T, rng)
            rows.append(BatchRow(
                step_multiplier=agent.step_multiplier,
                seed=seed,
                gas=goal_achievement_score(traj, final, weights),
                ds=distance_score(traj, final, weights),
                resources=resource_usage(traj),
                rounds_final_achieved=int(np.sum(traj.final_goal_achieved)),
                subgoal_achieved_round=subgoal_achieved_round(traj, n_sub),
            ))
            if keep_trajectories:
                trajs.append(traj)
            k += 1
    return BatchResult(rows=tuple(rows), horizon=int(T),
                       rollouts=int(rollouts_per_agent),
                       master_seed=int(master_seed), n_subgoals=n_sub,
                       trajectories=tuple(trajs) if keep_trajectories else None)


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_mwu_pvalues(ranks2: np.ndarray, n_a: int, u_a: float):
    """Exact null distribution of U_a given the tie pattern, by integer DP.

    ranks2 are doubled midranks (integers). dp[j][s] counts size-j subsets
    of the processed ranks with doubled rank sum s. Returns one-sided
    (less, greater) tail probabilities, inclusive of the observed point.
    """
    ranks2 = np.sort(ranks2.astype(np.int64))
    total = int(ranks2.sum())
    dp = np.zeros((n_a + 1, total + 1))
    dp[0, 0] = 1.0
    for r in ranks2:
        # iterate j downward so each rank is used at most once
        for j in range(n_a, 0, -1):
            dp[j, r:] += dp[j - 1, : total + 1 - r]
    counts = dp[n_a]
    n_comb = counts.sum()
    # doubled rank sum s corresponds to U = s/2 - n_a(n_a+1)/2
    s_idx = int(round(2.0 * (u_a + n_a * (n_a + 1) / 2.0)))
    p_less = float(counts[: s_idx + 1].sum() / n_comb)
    p_greater = float(counts[s_idx:].sum() / n_comb)
    return p_less, p_greater


def mann_whitney_u(sample_a, sample_b, alternative: str = "two-sided",
                   method: str = "auto") -> TestResult:
    """Mann-Whitney U test with midrank ties.

    The statistic is U_a, the number of (a, b) pairs where a exceeds b
    (ties counting half). method 'auto' enumerates the exact conditional
    distribution when either group has fewer than 8 observations and the
    subset count is tractable, and otherwise uses the normal approximation
    with tie-corrected variance and continuity correction. 'exact' and
    'approx' force the choice.
    """
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    if method not in ("auto", "exact", "approx"):
        raise ValueError("method must be one of 'auto', 'exact', 'approx'")
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must contain only finite values")
    n_a, n_b = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r_a = float(ranks[:n_a].sum())
    u_a = r_a - n_a * (n_a + 1) / 2.0

    if method == "exact":
        use_exact = True
    elif method == "approx":
        use_exact = False
    else:
        use_exact = (min(n_a, n_b) < 8
                     and math.comb(n_a + n_b, n_a) <= _EXACT_COMB_LIMIT)
    if use_exact and math.comb(n_a + n_b, n_a) > 100 * _EXACT_COMB_LIMIT:
        raise ValueError("exact method is infeasible for these sample sizes")

    if use_exact:
        p_less, p_greater = _exact_mwu_pvalues(2.0 * ranks, n_a, u_a)
    else:
        n = n_a + n_b
        mu = n_a * n_b / 2.0
        _, tie_counts = np.unique(pooled, return_counts=True)
        tie_term = float(np.sum(tie_counts.astype(float) ** 3 - tie_counts))
        var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
        if var <= 0.0:
            p_less = p_greater = 1.0
        else:
            sd = math.sqrt(var)
            p_greater = _norm_sf((u_a - mu - 0.5) / sd)
            p_less = _norm_cdf((u_a - mu + 0.5) / sd)

    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    else:
        p = min(1.0, 2.0 * min(p_less, p_greater))
    return TestResult(statistic=float(u_a), p_value=float(p),
                      alternative=alternative)


def two_proportion_z(successes_a: int, n_a: int, successes_b: int, n_b: int,
                     alternative: str = "two-sided") -> TestResult:
    """Pooled two-proportion z test; degenerate pooled rates give z=0, p=1."""
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    for s, n, label in ((successes_a, n_a, "a"), (successes_b, n_b, "b")):
        if int(n) != n or n < 1:
            raise ValueError(f"n_{label} must be a positive integer")
        if int(s) != s or not 0 <= s <= n:
            raise ValueError(f"successes_{label} must lie in [0, n_{label}]")
    p_a = successes_a / n_a
    p_b = successes_b / n_b
    pooled = (successes_a + successes_b) / (n_a + n_b)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b))
    if se == 0.0:
        z = 0.0
        p_less = p_greater = 1.0
    else:
        z = (p_a - p_b) / se
        p_greater = _norm_sf(z)
        p_less = _norm_cdf(z)
    if alternative == "greater":
        p = p_greater
    elif alternative == "less":
        p = p_less
    else:
        p = min(1.0, 2.0 * min(p_less, p_greater))
    return TestResult(statistic=float(z), p_value=float(p),
                      alternative=alternative)


@dataclass(frozen=True)
class MetricComparison:
    """One metric's summary in both conditions plus its tests."""

    metric: str
    with_subgoal: float
    without_subgoal: float
    tests: dict

    def __post_init__(self) -> None:
        for t in self.tests.values():
            if not isinstance(t, TestResult):
                raise ValueError("tests must map names to TestResult records")


@dataclass(frozen=True)
class ComparisonReport:
    """The four condition comparisons in one record."""

    metrics: tuple[MetricComparison, ...]
    n_with: int
    n_without: int

    def metric(self, name: str) -> MetricComparison:
        for m in self.metrics:
            if m.metric == name:
                return m
        raise KeyError(name)

    def as_table(self) -> str:
        lines = [
            f"{'metric':<22}{'with':>12}{'without':>12}"
            f"{'statistic':>14}{'p (two-sided)':>15}",
        ]
        for m in self.metrics:
            t = m.tests["two-sided"]
            lines.append(
                f"{m.metric:<22}{m.with_subgoal:>12.4f}"
                f"{m.without_subgoal:>12.4f}{t.statistic:>14.4f}"
                f"{t.p_value:>15.4g}"
            )
        return "\n".join(lines)


def compare_conditions(with_subgoal: BatchResult,
                       without: BatchResult) -> ComparisonReport:
    """Compare the two conditions on GAS, positive-GAS rate, resources, DS.

    GAS and resource usage and the distance score are compared with the
    Mann-Whitney U test (plus a directional variant: higher GAS, lower
    resources, lower DS under subgoals); the positive-GAS proportions with
    the pooled z test.
    """
    gw = with_subgoal.gas_values
    go = without.gas_values
    rw = with_subgoal.resource_values
    ro = without.resource_values
    dw = with_subgoal.ds_values
    do = without.ds_values
    pos_w = int(np.sum(gw > 0.0))
    pos_o = int(np.sum(go > 0.0))

    metrics = (
        MetricComparison(
            metric="gas_mean",
            with_subgoal=float(gw.mean()),
            without_subgoal=float(go.mean()),
            tests={
                "two-sided": mann_whitney_u(gw, go, "two-sided"),
                "greater": mann_whitney_u(gw, go, "greater"),
            },
        ),
        MetricComparison(
            metric="gas_positive_rate",
            with_subgoal=pos_w / gw.size,
            without_subgoal=pos_o / go.size,
            tests={
                "two-sided": two_proportion_z(pos_w, gw.size, pos_o, go.size,
                                              "two-sided"),
                "greater": two_proportion_z(pos_w, gw.size, pos_o, go.size,
                                            "greater"),
            },
        ),
        MetricComparison(
            metric="resource_usage_mean",
            with_subgoal=float(rw.mean()),
            without_subgoal=float(ro.mean()),
            tests={
                "two-sided": mann_whitney_u(rw, ro, "two-sided"),
                "less": mann_whitney_u(rw, ro, "less"),
            },
        ),
        MetricComparison(
            metric="distance_score_median",
            with_subgoal=float(np.median(dw)),
            without_subgoal=float(np.median(do)),
            tests={
                "two-sided": mann_whitney_u(dw, do, "two-sided"),
                "less": mann_whitney_u(dw, do, "less"),
            },
        ),
    )
    return ComparisonReport(metrics=metrics, n_with=gw.size, n_without=go.size)
