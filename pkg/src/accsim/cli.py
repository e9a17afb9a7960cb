"""Command-line entry point: ``accsim run|compare|stats|tune``."""

import argparse
import json
import os
import sys

from . import analytics
from .engine import COLLISION, TIMEOUT, TraceFormatError, read_trace_csv, run_simulation
from .scenario import ScenarioError, load_scenario_file
from .tuner import (GRID_SIZE, ObjectiveError, history_csv, load_objective_file, tune,
                    tuned_gains_json)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_COLLISION = 2
EXIT_TIMEOUT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for collisions here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fail(msg):
    print(f"accsim: error: {msg}", file=sys.stderr)
    return EXIT_INPUT


def _write(out_dir, name, text):
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load(path):
    if not os.path.isfile(path):
        raise UsageError(f"scenario file not found: {path}")
    try:
        return load_scenario_file(path)
    except ScenarioError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _status_code(*traces):
    if any(t.status == COLLISION for t in traces):
        return EXIT_COLLISION
    if any(t.status == TIMEOUT for t in traces):
        return EXIT_TIMEOUT
    return EXIT_OK


def _report_failures(label, trace):
    for c in trace.collisions:
        print(f"accsim: {label}: collision at t={c.time_s:g} s between {c.leader_id} and "
              f"{c.follower_id} (gap {c.gap_m:.3f} m)", file=sys.stderr)
    if trace.status == TIMEOUT:
        print(f"accsim: {label}: time ceiling reached before every vehicle finished",
              file=sys.stderr)


def cmd_run(args):
    scenario = _load(args.scenario)
    os.makedirs(args.out, exist_ok=True)
    trace = run_simulation(scenario)
    _write(args.out, "trace.csv", trace.to_csv())
    _write(args.out, "summary.json", trace.summary_json())
    _report_failures(args.scenario, trace)
    return _status_code(trace)


def _labels(path_a, path_b):
    a = os.path.splitext(os.path.basename(path_a))[0]
    b = os.path.splitext(os.path.basename(path_b))[0]
    if a == b:
        return a + "_a", b + "_b"
    return a, b


def cmd_compare(args):
    sa, sb = _load(args.scenario_a), _load(args.scenario_b)
    if set(sa.vehicle_ids) != set(sb.vehicle_ids):
        raise UsageError(f"vehicle ids differ: {sorted(sa.vehicle_ids)} vs {sorted(sb.vehicle_ids)}")
    la, lb = _labels(args.scenario_a, args.scenario_b)
    ta, tb = run_simulation(sa), run_simulation(sb)
    report = analytics.compare_runs(ta, tb, la, lb)
    os.makedirs(args.out, exist_ok=True)
    _write(args.out, "report.json", analytics.report_json(report))
    _write(args.out, "report.txt", analytics.report_text(report))
    series = {}
    for label, trace in ((la, ta), (lb, tb)):
        series[label] = analytics.spacing_series(trace)
        _write(args.out, f"trace_{label}.csv", trace.to_csv())
        _write(args.out, f"speeds_{label}.csv", analytics.speeds_csv(trace))
        _write(args.out, f"spacing_{label}.csv", analytics.spacing_csv(series[label]))
        _report_failures(label, trace)
    _write(args.out, "spacing.svg", analytics.spacing_svg(series))
    return _status_code(ta, tb)


def cmd_stats(args):
    if not os.path.isfile(args.trace):
        raise UsageError(f"trace file not found: {args.trace}")
    try:
        with open(args.trace, encoding="utf-8") as fh:
            trace = read_trace_csv(fh.read())
    except TraceFormatError as exc:
        raise UsageError(f"{args.trace}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {args.trace}: {exc}") from exc
    try:
        stats = analytics.trace_stats(trace, args.anova)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    if args.format in ("json", "both"):
        _write(args.out, "stats.json", json.dumps(stats, indent=2) + "\n")
    if args.format in ("text", "both"):
        _write(args.out, "stats.txt", analytics.stats_text(stats))
    return EXIT_OK


def cmd_tune(args):
    if not os.path.isfile(args.objective):
        raise UsageError(f"objective file not found: {args.objective}")
    if args.budget < GRID_SIZE:
        raise UsageError(f"budget {args.budget} is below the minimum of {GRID_SIZE} "
                         f"(one evaluation per point of the 3x3x3 starting grid)")
    try:
        objective = load_objective_file(args.objective)
    except ObjectiveError as exc:
        raise UsageError(f"{args.objective}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {args.objective}: {exc}") from exc
    gains, cost, history = tune(objective, args.budget)
    os.makedirs(args.out, exist_ok=True)
    _write(args.out, "tuned_gains.json",
           tuned_gains_json(gains, cost, objective, args.budget, len(history)))
    _write(args.out, "tune_history.csv", history_csv(history))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="accsim", description="Adaptive cruise control platoon simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("scenario")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="simulate two scenarios and compare them (b vs a)")
    c.add_argument("scenario_a")
    c.add_argument("scenario_b")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("stats", help="speed summaries and ANOVA from a trace CSV")
    s.add_argument("trace")
    s.add_argument("--anova", choices=("speed", "spacing"))
    s.add_argument("--format", choices=("json", "text", "both"), default="both")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_stats)

    t = sub.add_parser("tune", help="tune PID gains against an objective file")
    t.add_argument("objective")
    t.add_argument("--budget", type=int, default=200)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tune)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
