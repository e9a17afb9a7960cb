"""Speed summaries, spacing series, travel-time deltas and one-way ANOVA."""

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field

from .special import f_survival

QUARTILE_METHOD = "linear interpolation between order statistics at rank (n-1)q (type 7)"
WHISKER_K = 1.5
SST_REL_TOL = 1e-9


@dataclass(frozen=True)
class SpeedSummary:
    median: float
    q1: float
    q3: float
    iqr: float
    lower_whisker: float
    upper_whisker: float
    outliers: list = field(default_factory=list)
    n: int = 0

    def to_dict(self):
        return {
            "n": self.n, "median": self.median, "q1": self.q1, "q3": self.q3, "iqr": self.iqr,
            "lower_whisker": self.lower_whisker, "upper_whisker": self.upper_whisker,
            "outlier_count": len(self.outliers), "outliers": list(self.outliers),
        }


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    df_between: int
    df_within: int
    p_value: float
    group_means: list
    grand_mean: float
    infinite_f: bool = False

    def to_dict(self):
        return {
            "f_statistic": None if self.infinite_f else self.f_statistic,
            "infinite_f": self.infinite_f,
            "df_between": self.df_between,
            "df_within": self.df_within,
            "p_value": self.p_value,
            "p_value_display": format_p(self.p_value),
            "group_means": list(self.group_means),
            "grand_mean": self.grand_mean,
        }


def format_p(p):
    """Four significant figures; scientific notation below 1e-4."""
    if p == 0:
        return "0"
    if p < 1e-4:
        return f"{p:.3e}"
    return f"{p:#.4g}"


def _quantile(ordered, q):
    h = (len(ordered) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (h - lo) * (ordered[hi] - ordered[lo])


def speed_summary(samples):
    """Median, quartiles, 1.5 IQR fences and the samples beyond them."""
    ordered = sorted(samples)
    if not ordered:
        raise ValueError("speed_summary needs at least one sample")
    q1 = _quantile(ordered, 0.25)
    med = _quantile(ordered, 0.5)
    q3 = _quantile(ordered, 0.75)
    iqr = q3 - q1
    lo = q1 - WHISKER_K * iqr
    hi = q3 + WHISKER_K * iqr
    outliers = [x for x in ordered if x < lo or x > hi]
    return SpeedSummary(med, q1, q3, iqr, lo, hi, outliers, len(ordered))


def one_way_anova(groups):
    """One-way ANOVA F test across ``groups`` (a list of sample lists)."""
    groups = [list(map(float, g)) for g in groups]
    k = len(groups)
    if k < 2:
        raise ValueError(f"ANOVA needs at least 2 groups, got {k}")
    for i, g in enumerate(groups):
        if len(g) < 2:
            raise ValueError(f"ANOVA group {i} has {len(g)} sample(s); at least 2 required")
    n_total = sum(len(g) for g in groups)
    means = [math.fsum(g) / len(g) for g in groups]
    grand = math.fsum(math.fsum(g) for g in groups) / n_total

    ssb = math.fsum(len(g) * (m - grand) ** 2 for g, m in zip(groups, means))
    ssw = math.fsum((x - m) ** 2 for g, m in zip(groups, means) for x in g)
    sst = math.fsum((x - grand) ** 2 for g in groups for x in g)
    sumsq = math.fsum(x * x for g in groups for x in g)
    # floor the tolerance at rounding level for data far from zero
    tol = SST_REL_TOL * max(sst, 16 * 2.0 ** -52 * sumsq)
    if abs(ssb + ssw - sst) > tol:
        raise ArithmeticError(f"sum-of-squares identity violated: {ssb} + {ssw} != {sst}")

    df_b = k - 1
    df_w = n_total - k
    msb = ssb / df_b
    msw = ssw / df_w
    if msb == 0:
        return AnovaResult(0.0, df_b, df_w, 1.0, means, grand)
    if msw == 0:
        return AnovaResult(math.inf, df_b, df_w, 0.0, means, grand, infinite_f=True)
    f = msb / msw
    return AnovaResult(f, df_b, df_w, f_survival(f, df_b, df_w), means, grand)


def percent_change(base, new):
    """(new - base) / base * 100, or None when the base is zero or missing."""
    if base is None or new is None or base == 0:
        return None
    return (new - base) / base * 100.0


def speed_samples(trace):
    """Per-vehicle speed samples in trace order, stationary ticks included."""
    out = {vid: [] for vid in trace.vehicle_ids}
    for row in trace.rows:
        out[row.vehicle_id].append(row.speed_kmh)
    return out


def infer_lengths(trace):
    """Vehicle lengths recovered from the gap column.

    gap_m of a follower is measured to the rear bumper of its immediate
    leader, so leader length = leader position - follower position - gap.
    The median over ticks absorbs CSV rounding.
    """
    by_tick = {}
    for row in trace.rows:
        by_tick.setdefault(row.tick, {})[row.vehicle_id] = row
    estimates = {vid: [] for vid in trace.vehicle_ids}
    ids = trace.vehicle_ids
    for rows in by_tick.values():
        for lead, follow in zip(ids, ids[1:]):
            if lead in rows and follow in rows and rows[follow].gap_m is not None:
                estimates[lead].append(rows[lead].position_m - rows[follow].position_m
                                       - rows[follow].gap_m)
    return {vid: statistics.median(v) for vid, v in estimates.items() if v}


def spacing_series(trace):
    """Bumper-to-bumper spacing over time for every ordered (front, rear) pair.

    Returns ``{(front, rear): [(tick, time_s, spacing_m), ...]}`` covering the
    ticks on which both vehicles are active. Adjacent pairs use gap_m as
    recorded; other pairs use positions and the inferred front length.
    """
    lengths = infer_lengths(trace)
    by_tick = {}
    for row in trace.rows:
        by_tick.setdefault(row.tick, {})[row.vehicle_id] = row
    ids = trace.vehicle_ids
    series = {}
    for i, front in enumerate(ids):
        for j in range(i + 1, len(ids)):
            rear = ids[j]
            pts = []
            for tick in sorted(by_tick):
                rows = by_tick[tick]
                if front not in rows or rear not in rows:
                    continue
                if j == i + 1 and rows[rear].gap_m is not None:
                    s = rows[rear].gap_m
                elif front in lengths:
                    s = rows[front].position_m - lengths[front] - rows[rear].position_m
                else:
                    continue
                pts.append((tick, rows[rear].time_s, s))
            series[(front, rear)] = pts
    return series


def adjacent_spacing_groups(trace):
    """gap_m samples per adjacent pair, the grouping used for spacing ANOVA."""
    ids = trace.vehicle_ids
    groups = {}
    for lead, follow in zip(ids, ids[1:]):
        groups[(lead, follow)] = [r.gap_m for r in trace.rows
                                  if r.vehicle_id == follow and r.gap_m is not None]
    return groups


def _anova_or_reason(groups):
    try:
        return one_way_anova(groups).to_dict()
    except ValueError as exc:
        return {"error": str(exc)}


def pair_label(pair):
    return f"{pair[0]}->{pair[1]}"


def trace_stats(trace, anova=None):
    """Per-vehicle speed summaries plus an optional ANOVA ("speed" or "spacing").

    Raises ValueError when the requested ANOVA is not defined for the trace.
    """
    speeds = speed_samples(trace)
    out = {
        "quartile_method": QUARTILE_METHOD,
        "vehicles": {vid: speed_summary(s).to_dict() for vid, s in speeds.items() if s},
    }
    if anova == "speed":
        out["anova"] = {"grouping": "speed by vehicle",
                        "groups": list(speeds),
                        **one_way_anova(list(speeds.values())).to_dict()}
    elif anova == "spacing":
        groups = adjacent_spacing_groups(trace)
        out["anova"] = {"grouping": "spacing by adjacent pair",
                        "groups": [pair_label(p) for p in groups],
                        **one_way_anova(list(groups.values())).to_dict()}
    elif anova is not None:
        raise ValueError(f"unknown ANOVA grouping {anova!r}; use 'speed' or 'spacing'")
    return out


def compare_runs(trace_a, trace_b, label_a="a", label_b="b"):
    """Compare two runs of the same platoon (``b`` relative to ``a``)."""
    if set(trace_a.vehicle_ids) != set(trace_b.vehicle_ids):
        only_a = sorted(set(trace_a.vehicle_ids) - set(trace_b.vehicle_ids))
        only_b = sorted(set(trace_b.vehicle_ids) - set(trace_a.vehicle_ids))
        raise ValueError(f"vehicle sets differ: only in {label_a}: {only_a}, "
                         f"only in {label_b}: {only_b}")
    speeds = {label_a: speed_samples(trace_a), label_b: speed_samples(trace_b)}
    vehicles = []
    for vid in trace_a.vehicle_ids:
        t_a = trace_a.travel_times.get(vid)
        t_b = trace_b.travel_times.get(vid)
        s_a = speed_summary(speeds[label_a][vid]) if speeds[label_a][vid] else None
        s_b = speed_summary(speeds[label_b][vid]) if speeds[label_b][vid] else None
        drop = None
        if s_a is not None and s_b is not None and s_a.median != 0:
            drop = (s_a.median - s_b.median) / s_a.median * 100.0
        vehicles.append({
            "id": vid,
            "travel_time_s": {label_a: t_a, label_b: t_b},
            "travel_time_delta_pct": percent_change(t_a, t_b),
            "speed": {label_a: s_a.to_dict() if s_a else None,
                      label_b: s_b.to_dict() if s_b else None},
            "median_speed_drop_pct": drop,
        })
    anova = {"speed": {}, "spacing": {}}
    for label, trace in ((label_a, trace_a), (label_b, trace_b)):
        anova["speed"][label] = _anova_or_reason(list(speeds[label].values()))
        anova["spacing"][label] = _anova_or_reason(list(adjacent_spacing_groups(trace).values()))
    return {
        "runs": [label_a, label_b],
        "quartile_method": QUARTILE_METHOD,
        "travel_time_delta_basis": f"(t_{label_b} - t_{label_a}) / t_{label_a} * 100",
        "median_speed_drop_basis": f"(median_{label_a} - median_{label_b}) / median_{label_a} * 100",
        "vehicles": vehicles,
        "anova": anova,
    }


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def _num(x, digits=2):
    return "-" if x is None else f"{x:.{digits}f}"


def _anova_line(res):
    if "error" in res:
        return f"n/a ({res['error']})"
    f = "inf" if res["infinite_f"] else f"{res['f_statistic']:.4g}"
    return f"F({res['df_between']}, {res['df_within']}) = {f}, p = {res['p_value_display']}"


def report_text(report):
    """Aligned plain-text rendering of :func:`compare_runs` output."""
    a, b = report["runs"]
    header = ["vehicle", f"t_{a} [s]", f"t_{b} [s]", "delta [%]",
              f"med_{a} [km/h]", f"med_{b} [km/h]", "drop [%]"]
    rows = []
    for v in report["vehicles"]:
        sa, sb = v["speed"][a], v["speed"][b]
        rows.append([v["id"], _num(v["travel_time_s"][a]), _num(v["travel_time_s"][b]),
                     _num(v["travel_time_delta_pct"]),
                     _num(sa["median"] if sa else None), _num(sb["median"] if sb else None),
                     _num(v["median_speed_drop_pct"])])
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    out = [f"comparison: {b} relative to {a}",
           f"travel-time delta = {report['travel_time_delta_basis']}",
           f"median drop = {report['median_speed_drop_basis']}",
           f"quartiles: {report['quartile_method']}",
           "",
           line(header),
           line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    out.append("")
    for kind in ("speed", "spacing"):
        for label in (a, b):
            out.append(f"ANOVA {kind} [{label}]: {_anova_line(report['anova'][kind][label])}")
    return "\n".join(out) + "\n"


def stats_text(stats):
    """Plain-text rendering of :func:`trace_stats` output."""
    header = ["vehicle", "n", "median", "q1", "q3", "iqr", "outliers"]
    rows = [[vid, str(s["n"]), _num(s["median"]), _num(s["q1"]), _num(s["q3"]),
             _num(s["iqr"]), str(s["outlier_count"])] for vid, s in stats["vehicles"].items()]
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = [f"quartiles: {stats['quartile_method']}"]
    for r in [header] + rows:
        lines.append("  ".join([r[0].ljust(widths[0])]
                               + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]))
    if "anova" in stats:
        res = stats["anova"]
        lines.append(f"ANOVA ({res['grouping']}): {_anova_line(res)}")
    return "\n".join(lines) + "\n"


def _g(x):
    return "" if x is None else f"{x:.6g}"


def speeds_csv(trace):
    """Long-form speed samples: one line per vehicle per tick."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vehicle_id", "tick", "time_s", "speed_kmh"])
    for vid in trace.vehicle_ids:
        for r in trace.rows:
            if r.vehicle_id == vid:
                w.writerow([vid, r.tick, _g(r.time_s), _g(r.speed_kmh)])
    return buf.getvalue()


def spacing_csv(series):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pair", "tick", "time_s", "spacing_m"])
    for pair, pts in series.items():
        for tick, t, s in pts:
            w.writerow([pair_label(pair), tick, _g(t), _g(s)])
    return buf.getvalue()


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _nice_step(span, target=5):
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def spacing_svg(runs, width=720, height=360):
    """Minimal SVG line chart of spacing over time.

    ``runs`` maps a run label to a :func:`spacing_series` result; each
    (run, pair) becomes one polyline.
    """
    lines = [(f"{label}: {pair_label(pair)}", pts)
             for label, series in runs.items() for pair, pts in series.items() if pts]
    left, right, top, bottom = 60, 20, 20, 40
    xs = [p[1] for _, pts in lines for p in pts] or [0.0, 1.0]
    ys = [p[2] for _, pts in lines for p in pts] or [0.0, 1.0]
    x_max = max(max(xs), 1e-9)
    y_min = min(0.0, min(ys))
    y_max = max(max(ys), y_min + 1e-9)
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + pw * x / x_max

    def sy(y):
        return top + ph * (1.0 - (y - y_min) / (y_max - y_min))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<path d="M{left},{top} V{top + ph} H{left + pw}" stroke="black" fill="none"/>']
    step = _nice_step(x_max)
    k = 0
    while k * step <= x_max + 1e-9:
        x = sx(k * step)
        out.append(f'<path d="M{x:.2f},{top + ph} v5" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" font-size="11" '
                   f'text-anchor="middle">{k * step:g}</text>')
        k += 1
    step = _nice_step(y_max - y_min)
    k = math.ceil(y_min / step)
    while k * step <= y_max + 1e-9:
        y = sy(k * step)
        out.append(f'<path d="M{left - 5},{y:.2f} h5" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{k * step:g}</text>')
        k += 1
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 6}" font-size="12" '
               f'text-anchor="middle">time [s]</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.2f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.2f})">spacing [m]</text>')
    for i, (name, pts) in enumerate(lines):
        color = _COLORS[i % len(_COLORS)]
        d = " ".join(f"{sx(t):.2f},{sy(s):.2f}" for _, t, s in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 + 14 * i}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
