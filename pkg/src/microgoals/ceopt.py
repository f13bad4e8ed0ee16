"""Cross-entropy discovery of two-dimensional subgoals.

For every pair of state variables, a Gaussian distribution over
(target1, target2, log scale1, log scale2) is refined by elite refitting:
sample candidates, score each by the population's mean goal-achievement
score over Monte-Carlo rollouts, keep the top fraction, refit. The winner
across pairs is the best-ever candidate re-scored with a larger rollout
budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend, randkit
from ._kernel_py import pack_program
from .agents import AgentPopulation, population_arrays
from .core import Environment, GoalProgram, GoalSpec, ScoreWeights


@dataclass(frozen=True)
class SubgoalCandidate:
    """A two-dimensional subgoal: a pair of state indices, targets, scales."""

    dims: tuple[int, int]
    targets: tuple[float, float]
    scale: tuple[float, float]
    threshold: float = 1.0

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        targets = tuple(float(t) for t in self.targets)
        scale = tuple(float(g) for g in self.scale)
        if len(dims) != 2 or len(targets) != 2 or len(scale) != 2:
            raise ValueError("candidate must have exactly two dims, targets, scales")
        if not (0 <= dims[0] < dims[1]):
            raise ValueError(f"dims must satisfy 0 <= i1 < i2, got {dims}")
        if not all(math.isfinite(t) for t in targets):
            raise ValueError("targets must be finite")
        if not all(g > 0.0 and math.isfinite(g) for g in scale):
            raise ValueError("scale entries must be positive and finite")
        if not (self.threshold > 0.0 and math.isfinite(self.threshold)):
            raise ValueError("threshold must be positive and finite")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "scale", scale)

    def as_goal(self) -> GoalSpec:
        return GoalSpec(dims=self.dims, targets=np.array(self.targets),
                        scale=np.array(self.scale), threshold=self.threshold)


@dataclass(frozen=True)
class CEConfig:
    """Cross-entropy optimizer settings.

    init_target_mean of None means: use the final goal's targets on the
    pair's dimensions.
    """

    iterations: int = 10
    population_size: int = 1000
    elite_fraction: float = 0.2
    rollouts_per_candidate: int = 1
    final_reeval_rollouts: int = 100
    init_target_mean: tuple[float, float] | None = None
    init_target_std: tuple[float, float] = (20.0, 20.0)
    init_logscale_mean: tuple[float, float] = (math.log(0.5), math.log(0.5))
    init_logscale_std: tuple[float, float] = (1.5, 1.5)
    min_std: float = 1e-3
    subgoal_threshold: float = 1.0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0.0 < self.elite_fraction < 1.0:
            raise ValueError("elite_fraction must lie in (0, 1)")
        if self.elite_count < 2:
            raise ValueError(
                "elite count ceil(elite_fraction * population_size) must be >= 2"
            )
        if self.rollouts_per_candidate < 1 or self.final_reeval_rollouts < 1:
            raise ValueError("rollout counts must be >= 1")
        for name in ("init_target_std", "init_logscale_std"):
            vals = getattr(self, name)
            if len(vals) != 2 or not all(v > 0.0 and math.isfinite(v) for v in vals):
                raise ValueError(f"{name} must be two positive finite values")
        if self.init_target_mean is not None and (
            len(self.init_target_mean) != 2
            or not all(math.isfinite(v) for v in self.init_target_mean)
        ):
            raise ValueError("init_target_mean must be two finite values")
        if len(self.init_logscale_mean) != 2 or not all(
            math.isfinite(v) for v in self.init_logscale_mean
        ):
            raise ValueError("init_logscale_mean must be two finite values")
        if not (self.min_std > 0.0 and math.isfinite(self.min_std)):
            raise ValueError("min_std must be positive and finite")
        if not (self.subgoal_threshold > 0.0 and math.isfinite(self.subgoal_threshold)):
            raise ValueError("subgoal_threshold must be positive and finite")

    @property
    def elite_count(self) -> int:
        return math.ceil(self.elite_fraction * self.population_size)


@dataclass(frozen=True)
class CEDistribution:
    """Independent Gaussians over (target1, target2, log scale1, log scale2)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != (4,) or std.shape != (4,):
            raise ValueError("mean and std must be 4-vectors")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
            raise ValueError("mean and std must be finite")
        if not np.all(std > 0.0):
            raise ValueError("std entries must be positive")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def initial(cls, pair: tuple[int, int], final: GoalSpec,
                config: CEConfig) -> "CEDistribution":
        if config.init_target_mean is not None:
            tm = config.init_target_mean
        else:
            pos = [final.dims.index(d) for d in pair]
            tm = (final.targets[pos[0]], final.targets[pos[1]])
        mean = np.array([tm[0], tm[1],
                         config.init_logscale_mean[0], config.init_logscale_mean[1]])
        std = np.array([config.init_target_std[0], config.init_target_std[1],
                        config.init_logscale_std[0], config.init_logscale_std[1]])
        return cls(mean=mean, std=std)

    def sample(self, n: int, rng) -> np.ndarray:
        """Draw an (n, 4) array of candidate parameters."""
        if n < 1:
            raise ValueError("sample count must be >= 1")
        gen = randkit.as_generator(rng)
        return self.mean + self.std * gen.standard_normal((n, 4))

    def refit(self, elites: np.ndarray, min_std: float) -> "CEDistribution":
        """Fit mean and (population) std to the elites, flooring std."""
        elites = np.asarray(elites, dtype=np.float64)
        if elites.ndim != 2 or elites.shape[1] != 4 or elites.shape[0] < 1:
            raise ValueError("elites must be a nonempty (k, 4) array")
        return CEDistribution(mean=elites.mean(axis=0),
                              std=np.maximum(elites.std(axis=0), min_std))


@dataclass(frozen=True)
class PairOutcome:
    """Result of optimizing one pair: candidate, trace, re-evaluated score."""

    candidate: SubgoalCandidate
    elite_score_trace: tuple[float, ...]
    score: float
    search_score: float


@dataclass(frozen=True)
class OptimizationReport:
    """Discovery output across all pairs."""

    per_pair: dict
    winner: SubgoalCandidate
    winner_score: float
    seed: int

    def __post_init__(self) -> None:
        scores = [o.score for o in self.per_pair.values()]
        if scores and self.winner_score < max(scores) - 1e-12:
            raise ValueError("winner_score must be the maximum re-evaluated score")


def enumerate_pairs(n: int) -> list[tuple[int, int]]:
    """All C(n, 2) index pairs (i < j) in lexicographic order."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    n = int(n)
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def candidate_from_params(pair: tuple[int, int], params,
                          threshold: float = 1.0) -> SubgoalCandidate:
    """Build a candidate from a (4,) CE parameter vector."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (4,):
        raise ValueError("params must be a 4-vector")
    return SubgoalCandidate(dims=(int(pair[0]), int(pair[1])),
                            targets=(params[0], params[1]),
                            scale=(math.exp(params[2]), math.exp(params[3])),
                            threshold=threshold)


def estimate_performance(candidate: SubgoalCandidate, pop: AgentPopulation,
                         env: Environment, final: GoalSpec, s0, T: int,
                         rollouts: int, rng,
                         weights: ScoreWeights = ScoreWeights()) -> float:
    """Mean goal-achievement score over |pop| x rollouts episodes.

    Each agent runs `rollouts` episodes of the program (candidate, final),
    all drawing from one stream; the mean approximates the population
    expectation of the score.
    """
    if rollouts < 1:
        raise ValueError("rollouts must be >= 1")
    if candidate.dims[1] >= env.n_states:
        raise ValueError("candidate dims exceed environment state count")
    program = GoalProgram(subgoals=(candidate.as_goal(),), final=final)
    prog = pack_program(program)
    lams, nus, kaps, flags = population_arrays(pop)
    s0c = backend.contiguous_state(s0, env.n_states)
    return backend.mean_gas(env.A, env.B, s0c, T, prog, lams, nus, kaps, flags,
                            rollouts, weights.w1, weights.w2, weights.w3,
                            randkit.as_generator(rng))


def _stream(base: np.random.SeedSequence, key: tuple[int, ...]) -> np.random.Generator:
    child = np.random.SeedSequence(entropy=base.entropy,
                                   spawn_key=tuple(base.spawn_key) + key)
    return np.random.Generator(np.random.PCG64(child))


def ce_optimize_pair(pair: tuple[int, int], config: CEConfig, env: Environment,
                     final: GoalSpec, s0, T: int, pop: AgentPopulation, seed,
                     score_fn=None,
                     weights: ScoreWeights = ScoreWeights()) -> PairOutcome:
    """Optimize one pair's targets and scales by cross-entropy refitting.

    seed is an integer or SeedSequence; every candidate evaluation gets its
    own deterministic substream, so results do not depend on evaluation
    order. score_fn(candidate, rollouts, rng) replaces the default
    mean-score evaluator when given.
    """
    pair = (int(pair[0]), int(pair[1]))
    if not 0 <= pair[0] < pair[1] < env.n_states:
        raise ValueError(f"pair must satisfy 0 <= i1 < i2 < N, got {pair}")
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)

    if score_fn is None:
        sub = GoalSpec(dims=pair, targets=np.zeros(2), scale=np.ones(2),
                       threshold=config.subgoal_threshold)
        packed = pack_program(GoalProgram(subgoals=(sub,), final=final))
        lams, nus, kaps, flags = population_arrays(pop)
        s0c = backend.contiguous_state(s0, env.n_states)

        def _score(params: np.ndarray, rollouts: int, key: tuple[int, ...]) -> float:
            # The subgoal occupies the first two packed slots; mutating them
            # in place avoids rebuilding the program per candidate.
            packed.targets[0] = params[0]
            packed.targets[1] = params[1]
            packed.scale[0] = math.exp(params[2])
            packed.scale[1] = math.exp(params[3])
            return backend.mean_gas(env.A, env.B, s0c, T, packed, lams, nus,
                                    kaps, flags, rollouts, weights.w1,
                                    weights.w2, weights.w3, _stream(base, key))
    else:
        def _score(params: np.ndarray, rollouts: int, key: tuple[int, ...]) -> float:
            cand = candidate_from_params(pair, params, config.subgoal_threshold)
            return float(score_fn(cand, rollouts, _stream(base, key)))

    dist = CEDistribution.initial(pair, final, config)
    best_params: np.ndarray | None = None
    best_score = -math.inf
    trace: list[float] = []
    for it in range(config.iterations):
        samples = dist.sample(config.population_size, _stream(base, (0, it)))
        scores = np.empty(config.population_size)
        for c in range(config.population_size):
            scores[c] = _score(samples[c], config.rollouts_per_candidate,
                               (1, it, c))
        order = np.argsort(-scores, kind="stable")
        elite_idx = order[: config.elite_count]
        trace.append(float(scores[elite_idx].mean()))
        top = int(elite_idx[0])
        if scores[top] > best_score:
            best_score = float(scores[top])
            best_params = samples[top].copy()
        dist = dist.refit(samples[elite_idx], config.min_std)

    assert best_params is not None
    reeval = _score(best_params, config.final_reeval_rollouts, (2,))
    return PairOutcome(
        candidate=candidate_from_params(pair, best_params, config.subgoal_threshold),
        elite_score_trace=tuple(trace),
        score=float(reeval),
        search_score=best_score,
    )


def discover_subgoal(env: Environment, final: GoalSpec, s0, T: int,
                     pop: AgentPopulation, config: CEConfig, seed: int,
                     weights: ScoreWeights = ScoreWeights()) -> OptimizationReport:
    """Optimize every pair and pick the best re-evaluated candidate.

    Pair k runs under SeedSequence(seed, spawn_key=(k,)), so the report is a
    pure function of the inputs. Ties go to the lexicographically smallest
    pair.
    """
    master = int(seed)
    pairs = enumerate_pairs(env.n_states)
    per_pair: dict[tuple[int, int], PairOutcome] = {}
    for idx, pair in enumerate(pairs):
        base = np.random.SeedSequence(master, spawn_key=(idx,))
        per_pair[pair] = ce_optimize_pair(pair, config, env, final, s0, T, pop,
                                          base, weights=weights)
    winner_pair = max(pairs, key=lambda p: per_pair[p].score)
    return OptimizationReport(per_pair=per_pair,
                              winner=per_pair[winner_pair].candidate,
                              winner_score=per_pair[winner_pair].score,
                              seed=master)
