"""Canonical JSON formats: environment files and result records.

Environment files carry the dynamics, the initial state, the horizon, the
final goal (with per-dimension tolerances or scale weights, never both) and
optional subgoals. Result records (batches, discovery reports, comparisons,
trajectories) round-trip losslessly; none of them embed timestamps, so equal
inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ceopt import OptimizationReport, PairOutcome, SubgoalCandidate
from .core import (Environment, GoalProgram, GoalSpec, ScoreWeights,
                   Trajectory, tolerance_to_scale)
from .harness import BatchResult, BatchRow, ComparisonReport, TestResult

SCHEMA_VERSION = 1


class EnvFileError(ValueError):
    """Environment-file validation failure, naming the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class TaskConfig:
    """A loaded environment file: dynamics plus the canonical task setting."""

    env: Environment
    initial_state: np.ndarray
    horizon: int
    program: GoalProgram
    weights: ScoreWeights
    env_id: str
    comments: tuple[str, ...] = ()
    layout: dict[str, tuple[float, float]] | None = None

    @property
    def final_goal(self) -> GoalSpec:
        return self.program.final

    @property
    def subgoals(self) -> tuple[GoalSpec, ...]:
        return self.program.subgoals


def _require(data: dict, key: str, ctx: str):
    if key not in data:
        raise EnvFileError(f"{ctx}{key}", "missing required field")
    return data[key]


def _number_list(value, field: str, length: int | None = None) -> np.ndarray:
    if not isinstance(value, (list, tuple)):
        raise EnvFileError(field, f"expected a list of numbers, got {type(value).__name__}")
    try:
        arr = np.array([float(x) for x in value], dtype=np.float64)
    except (TypeError, ValueError):
        raise EnvFileError(field, "entries must be numbers") from None
    if length is not None and arr.shape != (length,):
        raise EnvFileError(field, f"expected {length} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise EnvFileError(field, "entries must be finite")
    return arr


def _matrix(value, field: str, rows: int, cols: int) -> np.ndarray:
    if not isinstance(value, list):
        raise EnvFileError(field, f"expected {rows} rows, got {type(value).__name__}")
    if len(value) != rows:
        raise EnvFileError(field, f"expected {rows} rows, got {len(value)}")
    out = np.empty((rows, cols))
    for i, row in enumerate(value):
        out[i] = _number_list(row, f"{field}[{i}]", cols)
    return out


def _name_list(value, field: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not value:
        raise EnvFileError(field, "expected a nonempty list of names")
    if not all(isinstance(x, str) and x for x in value):
        raise EnvFileError(field, "names must be nonempty strings")
    return tuple(value)


_GOAL_KEYS = {"dims", "targets", "tolerances", "scales", "threshold"}


def _reject_unknown(data: dict, allowed: set, ctx: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise EnvFileError(f"{ctx}{sorted(unknown)[0]}", "unknown field")


def _parse_goal(data, field: str, n_states: int,
                dims: tuple[int, ...] | None = None) -> GoalSpec:
    """Parse a goal block; dims of None means a final goal covering all dims."""
    if not isinstance(data, dict):
        raise EnvFileError(field, "expected an object")
    _reject_unknown(data, _GOAL_KEYS, f"{field}.")
    if dims is None:
        raw_dims = data.get("dims")
        if raw_dims is not None:
            got = tuple(int(d) for d in raw_dims)
            if got != tuple(range(n_states)):
                raise EnvFileError(f"{field}.dims",
                                   "final goal must cover all state dimensions")
        dims = tuple(range(n_states))
    d = len(dims)
    targets = _number_list(_require(data, "targets", f"{field}."),
                           f"{field}.targets", d)
    threshold = _require(data, "threshold", f"{field}.")
    if not isinstance(threshold, (int, float)) or isinstance(threshold, bool) \
            or not math.isfinite(threshold) or threshold <= 0:
        raise EnvFileError(f"{field}.threshold", "must be a positive finite number")

    has_tol = "tolerances" in data
    has_scale = "scales" in data
    if has_tol == has_scale:
        raise EnvFileError(
            field, "exactly one of 'tolerances' or 'scales' must be present")
    if has_tol:
        tol = _number_list(data["tolerances"], f"{field}.tolerances", d)
        if np.any(tol <= 0):
            raise EnvFileError(f"{field}.tolerances", "must be strictly positive")
        scale = tolerance_to_scale(tol, float(threshold))
    else:
        scale = _number_list(data["scales"], f"{field}.scales", d)
        if np.any(scale <= 0):
            raise EnvFileError(f"{field}.scales", "must be strictly positive")
    try:
        return GoalSpec(dims=dims, targets=targets, scale=scale,
                        threshold=float(threshold))
    except ValueError as exc:
        raise EnvFileError(field, str(exc)) from None


def parse_environment_file(data: dict, env_id: str = "environment") -> TaskConfig:
    """Validate an already-parsed environment-file object."""
    if not isinstance(data, dict):
        raise EnvFileError("$", "top level must be an object")
    _reject_unknown(data, {"schema_version", "environment", "initial_state",
                           "horizon", "final_goal", "subgoals",
                           "score_weights", "comments", "layout"}, "")
    version = _require(data, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise EnvFileError("schema_version",
                           f"unsupported version {version!r}, expected {SCHEMA_VERSION}")

    env_block = _require(data, "environment", "")
    if not isinstance(env_block, dict):
        raise EnvFileError("environment", "expected an object")
    _reject_unknown(env_block, {"state_names", "action_names", "A", "B"},
                    "environment.")
    state_names = _name_list(_require(env_block, "state_names", "environment."),
                             "environment.state_names")
    action_names = _name_list(_require(env_block, "action_names", "environment."),
                              "environment.action_names")
    n, m = len(state_names), len(action_names)
    A = _matrix(_require(env_block, "A", "environment."), "environment.A", n, n)
    B = _matrix(_require(env_block, "B", "environment."), "environment.B", n, m)
    try:
        env = Environment(state_names=state_names, action_names=action_names,
                          A=A, B=B)
    except ValueError as exc:
        raise EnvFileError("environment", str(exc)) from None

    s0 = _number_list(_require(data, "initial_state", ""), "initial_state", n)

    horizon = _require(data, "horizon", "")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise EnvFileError("horizon", "must be a positive integer")

    final = _parse_goal(_require(data, "final_goal", ""), "final_goal", n)

    subgoals = []
    for k, block in enumerate(data.get("subgoals", [])):
        fld = f"subgoals[{k}]"
        if not isinstance(block, dict):
            raise EnvFileError(fld, "expected an object")
        raw_dims = _require(block, "dims", f"{fld}.")
        if (not isinstance(raw_dims, list) or not raw_dims
                or not all(isinstance(d, int) and not isinstance(d, bool)
                           for d in raw_dims)):
            raise EnvFileError(f"{fld}.dims", "expected a list of state indices")
        dims = tuple(raw_dims)
        if any(d < 0 or d >= n for d in dims):
            raise EnvFileError(f"{fld}.dims", f"indices must lie in [0, {n - 1}]")
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise EnvFileError(f"{fld}.dims", "indices must be strictly increasing")
        subgoals.append(_parse_goal(block, fld, n, dims))

    weights = ScoreWeights()
    if "score_weights" in data:
        block = data["score_weights"]
        if not isinstance(block, dict):
            raise EnvFileError("score_weights", "expected an object")
        kwargs = {}
        for key in ("w1", "w2", "w3", "c"):
            if key in block:
                val = block[key]
                if not isinstance(val, (int, float)) or isinstance(val, bool) \
                        or not math.isfinite(val):
                    raise EnvFileError(f"score_weights.{key}", "must be a finite number")
                kwargs[key] = float(val)
        unknown = set(block) - {"w1", "w2", "w3", "c"}
        if unknown:
            raise EnvFileError(f"score_weights.{sorted(unknown)[0]}", "unknown field")
        weights = ScoreWeights(**kwargs)

    comments = data.get("comments", [])
    if isinstance(comments, str):
        comments = [comments]
    if not isinstance(comments, list) or not all(isinstance(c, str) for c in comments):
        raise EnvFileError("comments", "expected a string or list of strings")

    layout = None
    if "layout" in data:
        block = data["layout"]
        if not isinstance(block, dict):
            raise EnvFileError("layout", "expected an object of name -> [x, y]")
        known = set(state_names) | set(action_names)
        layout = {}
        for name, pos in block.items():
            if name not in known:
                raise EnvFileError(f"layout.{name}", "not a state or action name")
            xy = _number_list(pos, f"layout.{name}", 2)
            layout[name] = (float(xy[0]), float(xy[1]))

    try:
        program = GoalProgram(subgoals=tuple(subgoals), final=final)
    except ValueError as exc:
        raise EnvFileError("subgoals", str(exc)) from None
    return TaskConfig(env=env, initial_state=s0, horizon=horizon,
                      program=program, weights=weights, env_id=env_id,
                      comments=tuple(comments), layout=layout)


def load_environment(path) -> TaskConfig:
    """Load and validate an environment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise EnvFileError(str(path), f"cannot read file: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnvFileError(str(path), f"invalid JSON: {exc}") from None
    return parse_environment_file(data, env_id=path.stem)


def default_environment_path(name: str = "farm") -> Path:
    return Path(__file__).parent / "data" / f"{name}.json"


def dump_json(obj: dict, path) -> None:
    """Write a record deterministically (stable key order, newline-terminated)."""
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# -- record serialization ---------------------------------------------------

def goal_to_dict(goal: GoalSpec) -> dict:
    return {
        "dims": list(goal.dims),
        "targets": [float(x) for x in goal.targets],
        "scales": [float(x) for x in goal.scale],
        "threshold": float(goal.threshold),
    }


def goal_from_dict(data: dict, field: str = "goal") -> GoalSpec:
    if not isinstance(data, dict):
        raise EnvFileError(field, "expected an object")
    raw_dims = _require(data, "dims", f"{field}.")
    dims = tuple(int(d) for d in raw_dims)
    n = (max(dims) + 1) if dims else 0
    return _parse_goal(data, field, n, dims)


def candidate_to_dict(cand: SubgoalCandidate) -> dict:
    return {
        "dims": list(cand.dims),
        "targets": [float(x) for x in cand.targets],
        "scales": [float(x) for x in cand.scale],
        "threshold": float(cand.threshold),
    }


def candidate_from_dict(data: dict, field: str = "candidate") -> SubgoalCandidate:
    goal = goal_from_dict(data, field)
    if goal.n_dims != 2:
        raise EnvFileError(f"{field}.dims", "a subgoal candidate has exactly two dims")
    return SubgoalCandidate(dims=goal.dims, targets=tuple(goal.targets),
                            scale=tuple(goal.scale), threshold=goal.threshold)


def report_to_dict(report: OptimizationReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "optimization_report",
        "seed": report.seed,
        "winner": candidate_to_dict(report.winner),
        "winner_score": report.winner_score,
        "per_pair": [
            {
                "pair": list(pair),
                "candidate": candidate_to_dict(out.candidate),
                "score": out.score,
                "search_score": out.search_score,
                "elite_score_trace": list(out.elite_score_trace),
            }
            for pair, out in report.per_pair.items()
        ],
    }


def report_from_dict(data: dict) -> OptimizationReport:
    if not isinstance(data, dict) or data.get("kind") != "optimization_report":
        raise EnvFileError("kind", "expected an optimization_report record")
    per_pair = {}
    for k, block in enumerate(_require(data, "per_pair", "")):
        pair = tuple(int(x) for x in block["pair"])
        per_pair[pair] = PairOutcome(
            candidate=candidate_from_dict(block["candidate"],
                                          f"per_pair[{k}].candidate"),
            elite_score_trace=tuple(float(x) for x in block["elite_score_trace"]),
            score=float(block["score"]),
            search_score=float(block["search_score"]),
        )
    return OptimizationReport(
        per_pair=per_pair,
        winner=candidate_from_dict(_require(data, "winner", ""), "winner"),
        winner_score=float(_require(data, "winner_score", "")),
        seed=int(_require(data, "seed", "")),
    )


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "states": [[float(x) for x in row] for row in traj.states],
        "actions": [[float(x) for x in row] for row in traj.actions],
        "final_goal_achieved": [bool(x) for x in traj.final_goal_achieved],
        "active_goal_index": [int(x) for x in traj.active_goal_index],
    }


def trajectory_from_dict(data: dict) -> Trajectory:
    return Trajectory(
        states=np.array(data["states"], dtype=np.float64),
        actions=np.array(data["actions"], dtype=np.float64),
        final_goal_achieved=np.array(data["final_goal_achieved"], dtype=bool),
        active_goal_index=np.array(data["active_goal_index"], dtype=np.int64),
    )


def batch_to_dict(batch: BatchResult) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": "batch_result",
        "horizon": batch.horizon,
        "rollouts": batch.rollouts,
        "master_seed": batch.master_seed,
        "n_subgoals": batch.n_subgoals,
        "rows": [
            {
                "step_multiplier": r.step_multiplier,
                "seed": r.seed,
                "gas": r.gas,
                "ds": r.ds,
                "resources": r.resources,
                "rounds_final_achieved": r.rounds_final_achieved,
                "subgoal_achieved_round": r.subgoal_achieved_round,
            }
            for r in batch.rows
        ],
    }
    if batch.trajectories is not None:
        out["trajectories"] = [trajectory_to_dict(t) for t in batch.trajectories]
    return out


def batch_from_dict(data: dict) -> BatchResult:
    if not isinstance(data, dict) or data.get("kind") != "batch_result":
        raise EnvFileError("kind", "expected a batch_result record")
    rows = tuple(
        BatchRow(
            step_multiplier=float(r["step_multiplier"]),
            seed=int(r["seed"]),
            gas=float(r["gas"]),
            ds=float(r["ds"]),
            resources=float(r["resources"]),
            rounds_final_achieved=int(r["rounds_final_achieved"]),
            subgoal_achieved_round=(None if r["subgoal_achieved_round"] is None
                                    else int(r["subgoal_achieved_round"])),
        )
        for r in _require(data, "rows", "")
    )
    trajs = None
    if "trajectories" in data:
        trajs = tuple(trajectory_from_dict(t) for t in data["trajectories"])
    return BatchResult(rows=rows, horizon=int(data["horizon"]),
                       rollouts=int(data["rollouts"]),
                       master_seed=int(data["master_seed"]),
                       n_subgoals=int(data["n_subgoals"]),
                       trajectories=trajs)


def test_result_to_dict(result: TestResult) -> dict:
    return {
        "statistic": result.statistic,
        "p_value": result.p_value,
        "alternative": result.alternative,
    }


def comparison_to_dict(report: ComparisonReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "comparison_report",
        "n_with": report.n_with,
        "n_without": report.n_without,
        "metrics": [
            {
                "metric": m.metric,
                "with_subgoal": m.with_subgoal,
                "without_subgoal": m.without_subgoal,
                "tests": {name: test_result_to_dict(t)
                          for name, t in m.tests.items()},
            }
            for m in report.metrics
        ],
    }


def subgoals_from_file(path) -> tuple[GoalSpec, ...]:
    """Read subgoals from a discovery report or a bare goal/candidate file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise EnvFileError(str(path), f"cannot read file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise EnvFileError(str(path), f"invalid JSON: {exc}") from None
    if isinstance(data, dict) and data.get("kind") == "optimization_report":
        return (report_from_dict(data).winner.as_goal(),)
    if isinstance(data, dict):
        return (goal_from_dict(data, path.stem),)
    raise EnvFileError(str(path), "expected a goal object or optimization_report")
