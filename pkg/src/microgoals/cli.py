"""Command-line interface: simulate, discover, compare, serve, stats.

Exit codes: 0 success, 1 usage error, 2 validation error. simulate and
discover emit deterministic records (same seed, same bytes); compare prints
a human-readable table and optionally writes the structured report.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agents import default_population
from .ceopt import CEConfig, discover_subgoal
from .core import GoalProgram
from .envfile import (EnvFileError, TaskConfig, batch_from_dict,
                      batch_to_dict, comparison_to_dict,
                      default_environment_path, dump_json, load_environment,
                      report_to_dict, subgoals_from_file, test_result_to_dict)
from .harness import compare_conditions, mann_whitney_u, run_batch, two_proportion_z
from .service import SESSION_DIR_ENV

_METRICS = ("gas", "ds", "resources")


class _Parser(argparse.ArgumentParser):
    """Usage problems (unknown flags, missing arguments) exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _emit(payload: dict, out: str | None) -> None:
    if out:
        dump_json(payload, out)
    else:
        print(json.dumps(payload, indent=2))


def _checked_subgoals(cfg: TaskConfig, subgoal_file: str | None):
    subgoals = cfg.program.subgoals
    if subgoal_file:
        subgoals = subgoals_from_file(subgoal_file)
    for k, goal in enumerate(subgoals):
        if goal.dims[-1] >= cfg.env.n_states:
            raise EnvFileError(
                f"subgoals[{k}].dims",
                f"references dimension {goal.dims[-1]}, environment has "
                f"{cfg.env.n_states}")
    return subgoals


def cmd_simulate(args) -> int:
    cfg = load_environment(args.env)
    program = GoalProgram(subgoals=_checked_subgoals(cfg, args.subgoal_file),
                          final=cfg.final_goal)
    pop = default_population(size=args.agents, enable_noise=not args.no_noise)
    batch = run_batch(cfg.env, program, pop, cfg.initial_state, cfg.horizon,
                      args.rollouts, args.seed, cfg.weights)
    _emit(batch_to_dict(batch), args.out)
    if args.out:
        print(f"wrote {args.out}: {len(batch.rows)} rows, "
              f"mean GAS {batch.gas_values.mean():.4f}")
    return 0


def cmd_discover(args) -> int:
    cfg = load_environment(args.env)
    pop = default_population(size=args.agents, enable_noise=not args.no_noise)
    config = CEConfig(iterations=args.iterations,
                      population_size=args.population,
                      rollouts_per_candidate=args.rollouts)
    report = discover_subgoal(cfg.env, cfg.final_goal, cfg.initial_state,
                              cfg.horizon, pop, config, args.seed,
                              weights=cfg.weights)
    _emit(report_to_dict(report), args.out)
    if args.out:
        print(f"wrote {args.out}: winner dims {list(report.winner.dims)}, "
              f"score {report.winner_score:.4f}")
    return 0


def _load_batch(path: str):
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise EnvFileError(path, f"cannot read file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise EnvFileError(path, f"invalid JSON: {exc}") from None
    return batch_from_dict(data)


def cmd_compare(args) -> int:
    report = compare_conditions(_load_batch(args.with_file),
                                _load_batch(args.without_file))
    print(report.as_table())
    if args.out:
        dump_json(comparison_to_dict(report), args.out)
        print(f"wrote {args.out}")
    return 0


def _metric_values(path: str, metric: str) -> list[float]:
    """Metric column from a batch file, a session record, or a directory of
    session records."""
    p = Path(path)
    if p.is_dir():
        values = []
        for child in sorted(p.glob("*.json")):
            data = json.loads(child.read_text())
            if isinstance(data, dict) and data.get("kind") == "session_record":
                values.append(float(data["final_scores"][metric]))
        if not values:
            raise EnvFileError(path, "no session records found in directory")
        return values
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise EnvFileError(path, f"cannot read file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise EnvFileError(path, f"invalid JSON: {exc}") from None
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind == "batch_result":
        return [float(x) for x in batch_from_dict(data).column(metric)]
    if kind == "session_record":
        return [float(data["final_scores"][metric])]
    raise EnvFileError(path, "expected a batch_result or session_record file")


def cmd_stats(args) -> int:
    a = _metric_values(args.file_a, args.metric)
    b = _metric_values(args.file_b, args.metric)
    if args.test == "mwu":
        result = mann_whitney_u(a, b, alternative=args.alternative,
                                method=args.method)
    else:
        result = two_proportion_z(sum(1 for v in a if v > 0), len(a),
                                  sum(1 for v in b if v > 0), len(b),
                                  alternative=args.alternative)
    payload = {"test": args.test, "metric": args.metric,
               "n_a": len(a), "n_b": len(b)}
    payload.update(test_result_to_dict(result))
    _emit(payload, args.out)
    return 0


def cmd_serve(args) -> int:
    from .service import EnvEntry, create_app

    env_path = args.env or default_environment_path()
    cfg = load_environment(env_path)
    subgoals = _checked_subgoals(cfg, args.subgoal_file)
    if not subgoals and args.env is None:
        # The packaged farm ships its discovered subgoal alongside.
        subgoals = _checked_subgoals(
            cfg, str(default_environment_path().parent / "farm_subgoal.json"))
    session_dir = (args.session_dir
                   or os.environ.get(SESSION_DIR_ENV, "sessions"))
    app = create_app({cfg.env_id: EnvEntry(config=cfg, subgoals=subgoals)},
                     session_dir=session_dir)

    import uvicorn

    print(f"serving environment {cfg.env_id!r} on "
          f"http://{args.host}:{args.port} (sessions -> {session_dir})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="microgoals",
                     description="Microworld goal-setting toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser, required=True)

    sim = sub.add_parser("simulate", help="run an agent population batch")
    sim.add_argument("--env", required=True, help="environment file")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--rollouts", type=int, default=100,
                     help="rollouts per agent")
    sim.add_argument("--agents", type=int, default=30, help="population size")
    sim.add_argument("--subgoal-file", default=None,
                     help="subgoal or discovery report to pursue first")
    sim.add_argument("--no-noise", action="store_true",
                     help="disable action noise")
    sim.add_argument("--out", default=None, help="output file (default stdout)")
    sim.set_defaults(func=cmd_simulate)

    disc = sub.add_parser("discover", help="cross-entropy subgoal discovery")
    disc.add_argument("--env", required=True, help="environment file")
    disc.add_argument("--seed", type=int, default=0, help="master seed")
    disc.add_argument("--iterations", type=int, default=10,
                      help="CE iterations per pair")
    disc.add_argument("--population", type=int, default=1000,
                      help="CE candidates per iteration")
    disc.add_argument("--rollouts", type=int, default=1,
                      help="rollouts per candidate during search")
    disc.add_argument("--agents", type=int, default=30, help="population size")
    disc.add_argument("--no-noise", action="store_true",
                      help="disable action noise")
    disc.add_argument("--out", default=None, help="output file (default stdout)")
    disc.set_defaults(func=cmd_discover)

    comp = sub.add_parser("compare",
                          help="compare two simulate outputs (with, without)")
    comp.add_argument("with_file", help="batch file for the subgoal condition")
    comp.add_argument("without_file", help="batch file for the control condition")
    comp.add_argument("--out", default=None, help="structured report file")
    comp.set_defaults(func=cmd_compare)

    stats = sub.add_parser("stats", help="run a statistical test on records")
    stats.add_argument("test", choices=("mwu", "ztest"), help="test name")
    stats.add_argument("file_a", help="batch file, session record, or directory")
    stats.add_argument("file_b", help="batch file, session record, or directory")
    stats.add_argument("--metric", choices=_METRICS, default="gas")
    stats.add_argument("--alternative",
                       choices=("two-sided", "less", "greater"),
                       default="two-sided")
    stats.add_argument("--method", choices=("auto", "exact", "approx"),
                       default="auto", help="mwu only")
    stats.add_argument("--out", default=None, help="output file (default stdout)")
    stats.set_defaults(func=cmd_stats)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--env", default=None,
                       help="environment file (default: packaged farm)")
    serve.add_argument("--subgoal-file", default=None,
                       help="subgoal offered to the subgoal condition")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--session-dir", default=None,
                       help=f"trajectory output directory "
                            f"(default: ${SESSION_DIR_ENV} or ./sessions)")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
