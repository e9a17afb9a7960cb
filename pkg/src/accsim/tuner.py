"""Derivative-free PID gain tuning against closed-loop simulation cost."""

import csv
import io
import itertools
import json
import math
import os
from dataclasses import dataclass, field

from .controller import PidGains
from .engine import COLLISION, run_simulation
from .scenario import load_scenario_file, with_gains

GAIN_NAMES = ("kp", "ki", "kd")
DEFAULT_BOUNDS = {"kp": (0.0, 3.0), "ki": (0.0, 0.5), "kd": (0.0, 0.5)}
GRID_LEVELS = 3
GRID_SIZE = GRID_LEVELS ** len(GAIN_NAMES)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
LINE_TOL = 1e-4  # golden-section stop, relative to the coordinate's bound width


class ObjectiveError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class Weights:
    itae: float = 1.0
    overshoot: float = 50.0
    collision_penalty: float = 1e6


@dataclass
class TuneObjective:
    weights: Weights = field(default_factory=Weights)
    scenarios: list = field(default_factory=list)  # loaded Scenario objects
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    scenario_paths: list = field(default_factory=list)

    def __post_init__(self):
        w = self.weights
        vals = (w.itae, w.overshoot, w.collision_penalty)
        if any(not (v >= 0 and math.isfinite(v)) for v in vals) or not any(v > 0 for v in vals):
            raise ObjectiveError("weights", "weights must be finite, >= 0, and not all zero")
        for name in GAIN_NAMES:
            lo, hi = self.bounds[name]
            if not (0 <= lo <= hi and math.isfinite(hi)):
                raise ObjectiveError(f"bounds.{name}", f"need 0 <= lo <= hi, got [{lo}, {hi}]")

    def within_bounds(self, gains):
        return all(self.bounds[n][0] <= g <= self.bounds[n][1]
                   for n, g in zip(GAIN_NAMES, gains.as_tuple()))


def _resolve(ref, base_dir):
    """Scenario references are relative to the objective file, then the bundled set."""
    candidate = os.path.join(base_dir, ref)
    if os.path.exists(candidate):
        return candidate
    bundled = os.path.join(os.path.dirname(__file__), "scenarios", ref)
    if os.path.exists(bundled):
        return bundled
    return candidate


def objective_from_dict(doc, base_dir="."):
    if not isinstance(doc, dict):
        raise ObjectiveError("$", "objective must be a JSON object")
    wdoc = doc.get("weights", {})
    if not isinstance(wdoc, dict):
        raise ObjectiveError("weights", "must be an object")
    kw = {}
    for key in ("itae", "overshoot", "collision_penalty"):
        if key in wdoc:
            v = wdoc[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ObjectiveError(f"weights.{key}", f"expected a number, got {v!r}")
            kw[key] = float(v)
    bounds = dict(DEFAULT_BOUNDS)
    bdoc = doc.get("bounds", {})
    if not isinstance(bdoc, dict):
        raise ObjectiveError("bounds", "must be an object")
    for key, pair in bdoc.items():
        if key not in GAIN_NAMES:
            raise ObjectiveError(f"bounds.{key}", f"unknown gain; expected one of {GAIN_NAMES}")
        if (not isinstance(pair, list) or len(pair) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in pair)):
            raise ObjectiveError(f"bounds.{key}", "expected [lo, hi]")
        bounds[key] = (float(pair[0]), float(pair[1]))
    refs = []
    step = doc.get("step_scenario")
    if not isinstance(step, str):
        raise ObjectiveError("step_scenario", "required path to the step-response scenario")
    refs.append(("step_scenario", step))
    follow = doc.get("follow_scenario")
    if follow is not None:
        if not isinstance(follow, str):
            raise ObjectiveError("follow_scenario", "expected a path or null")
        refs.append(("follow_scenario", follow))
    scenarios, paths = [], []
    for key, ref in refs:
        path = _resolve(ref, base_dir)
        try:
            scenarios.append(load_scenario_file(path))
        except (OSError, ValueError) as exc:
            raise ObjectiveError(key, str(exc)) from exc
        paths.append(ref)
    return TuneObjective(Weights(**kw), scenarios, bounds, paths)


def load_objective_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ObjectiveError("$", f"invalid JSON: {exc}") from exc
    return objective_from_dict(doc, os.path.dirname(os.path.abspath(path)))


def trace_cost_terms(trace, cruise_targets):
    """(ITAE, overshoot fraction, collided) for one run.

    ITAE integrates t * |target - speed| over every recorded row; overshoot is
    the worst peak-over-cruise fraction across vehicles.
    """
    dt = trace.dt
    itae = math.fsum(r.time_s * abs(r.target_kmh - r.speed_kmh) * dt for r in trace.rows)
    peak = {}
    for r in trace.rows:
        peak[r.vehicle_id] = max(peak.get(r.vehicle_id, 0.0), r.speed_kmh)
    over = max((peak[v] / cruise_targets[v] - 1.0 for v in peak if cruise_targets[v] > 0),
               default=0.0)
    return itae, max(over, 0.0), trace.status == COLLISION


def combine_cost(weights, itae, overshoot, collided):
    return (weights.itae * itae + weights.overshoot * overshoot
            + weights.collision_penalty * (1.0 if collided else 0.0))


def evaluate_gains(gains, objective):
    """Closed-loop cost of ``gains`` summed over the objective's scenarios."""
    if not objective.within_bounds(gains):
        raise ValueError(f"gains {gains.as_tuple()} outside bounds {objective.bounds}")
    total = 0.0
    for scenario in objective.scenarios:
        trace = run_simulation(with_gains(scenario, gains))
        cruise = {v.id: v.script.cruise_speed or scenario.cruise_target for v in scenario.vehicles}
        total += combine_cost(objective.weights, *trace_cost_terms(trace, cruise))
    return total


class _Exhausted(Exception):
    pass


def grid_points(bounds):
    axes = []
    for name in GAIN_NAMES:
        lo, hi = bounds[name]
        axes.append([lo + (hi - lo) * i / (GRID_LEVELS - 1) for i in range(GRID_LEVELS)])
    return list(itertools.product(*axes))


def tune(objective, budget, cost_fn=None, seed_gains=PidGains()):
    """Minimise the objective over the gain box.

    Evaluates the 3x3x3 grid, then ``seed_gains`` clipped into the box, then
    runs coordinate descent with golden-section line searches from the best
    point, shrinking the search radius each sweep. ``cost_fn`` replaces
    :func:`evaluate_gains` (used for surrogate objectives). Returns
    ``(best_gains, best_cost, history)``; history rows are
    ``(index, kp, ki, kd, cost)`` in evaluation order.
    """
    if budget < GRID_SIZE:
        raise ValueError(f"budget {budget} is below the {GRID_SIZE}-point starting grid")
    if cost_fn is None:
        def cost_fn(g):
            return evaluate_gains(g, objective)
    bounds = objective.bounds
    memo = {}
    history = []

    def f(point):
        point = tuple(min(max(x, bounds[n][0]), bounds[n][1]) for n, x in zip(GAIN_NAMES, point))
        if point in memo:
            return memo[point]
        if len(history) >= budget:
            raise _Exhausted
        cost = cost_fn(PidGains(*point))
        memo[point] = cost
        history.append((len(history), *point, cost))
        return cost

    def best():
        point = min(memo, key=lambda p: (memo[p], p))
        return point, memo[point]

    try:
        for p in grid_points(bounds):
            f(p)
        f(seed_gains.as_tuple())
        radius = [bounds[n][1] - bounds[n][0] for n in GAIN_NAMES]
        while True:
            start_cost = best()[1]
            for i, name in enumerate(GAIN_NAMES):
                lo, hi = bounds[name]
                if hi == lo:
                    continue
                x, _ = best()
                a, b = max(lo, x[i] - radius[i]), min(hi, x[i] + radius[i])
                _golden(lambda v: f(x[:i] + (v,) + x[i + 1:]), a, b, LINE_TOL * (hi - lo))
            gained = start_cost - best()[1]
            radius = [r / 2.0 for r in radius]
            if gained <= 1e-12 * max(1.0, abs(start_cost)) and \
                    all(r < LINE_TOL * (bounds[n][1] - bounds[n][0])
                        for r, n in zip(radius, GAIN_NAMES)):
                break
    except _Exhausted:
        pass
    point, cost = best()
    return PidGains(*point), cost, history


def _golden(g, a, b, tol):
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - INV_PHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + INV_PHI * (b - a)
            gd = g(d)
    # endpoints are worth one look each: the optimum often sits on a bound
    g(a)
    g(b)


def tuned_gains_json(gains, cost, objective, budget, evaluations):
    doc = {
        "kp": gains.K_p, "ki": gains.K_i, "kd": gains.K_d,
        "cost": cost,
        "budget": budget,
        "evaluations": evaluations,
        "weights": {"itae": objective.weights.itae, "overshoot": objective.weights.overshoot,
                    "collision_penalty": objective.weights.collision_penalty},
        "bounds": {n: list(objective.bounds[n]) for n in GAIN_NAMES},
        "scenarios": list(objective.scenario_paths),
    }
    return json.dumps(doc, indent=2) + "\n"


def history_csv(history):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["evaluation", "kp", "ki", "kd", "cost"])
    for idx, kp, ki, kd, cost in history:
        w.writerow([idx, repr(kp), repr(ki), repr(kd), repr(cost)])
    return buf.getvalue()
