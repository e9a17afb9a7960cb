"""Acceptance criteria 1-10, one test each.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest.py) and when this file is run as a script.
"""

import contextlib
import json
import math
import os
import random
import shutil
import tempfile
import time
from fractions import Fraction

from accsim.cli import main as cli_main
from accsim.controller import (
    AccController, ControlMode, ControllerConfig, PidGains, PidState, SsdParams, compute_ssd,
    invert_ssd, pid_step, upper_level,
)
from accsim.analytics import compare_runs, one_way_anova
from accsim.dynamics import VehicleParams, VehicleState
from accsim.engine import run_simulation
from accsim.scenario import load_scenario_file, scenario_from_dict
from accsim.sensing import HEAVY_RAIN, NO_RAIN, RadarReading, SPEED_OF_LIGHT, measure, \
    time_of_flight_range
from accsim.special import f_survival
from accsim.tuner import GRID_SIZE, TuneObjective, evaluate_gains, load_objective_file, tune

from fuzzcases import FUZZ_SEEDS, fuzz_document
from loops import speed_loop

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIOS = os.path.join(HERE, "..", "src", "accsim", "scenarios")
DATA = os.path.join(HERE, "data")

RESULTS = {}
_traces = []  # every trace from criteria 4 and 5, for criterion 7


@contextlib.contextmanager
def criterion(n, title):
    try:
        yield
    except BaseException as exc:
        RESULTS[n] = f"FAIL criterion {n:>2}: {title} ({type(exc).__name__}: {exc})"
        raise
    RESULTS[n] = f"PASS criterion {n:>2}: {title}"


def scen(name):
    return load_scenario_file(os.path.join(SCENARIOS, name))


def _replication_traces():
    if len(_traces) < 2:
        _traces[:0] = [run_simulation(scen("noon_no_rain.json")),
                      run_simulation(scen("noon_heavy_rain.json"))]
    return _traces[0], _traces[1]


def test_c01_radar_range():
    with criterion(1, "radar range D = cT/2"):
        start = time.perf_counter()
        for i in range(1001):
            t = 1e-3 * i / 1000
            d = time_of_flight_range(t)
            expect = SPEED_OF_LIGHT * t / 2
            assert abs(d - expect) <= 1e-9 * expect
        rng = random.Random(1)
        for _ in range(500):
            own = VehicleState(position=rng.uniform(0, 100))
            lead = VehicleState(position=own.position + rng.uniform(4.7, 150))
            r = measure(own, lead, VehicleParams(), 0)
            back = time_of_flight_range(r.round_trip_time)
            assert abs(back - r.range) <= 1e-9 * max(r.range, 1e-12)
        assert time.perf_counter() - start < 1.0


def test_c02_stopping_distance():
    with criterion(2, "stopping distance hand values and inversion"):
        start = time.perf_counter()
        ssd = SsdParams(reaction_time_t=2.5, grade_G=0.0)
        assert abs(compute_ssd(80, NO_RAIN, ssd) - 91.60) <= 0.01
        assert abs(compute_ssd(50, HEAVY_RAIN, ssd) - 59.36) <= 0.01
        for w in (NO_RAIN, HEAVY_RAIN):
            for i in range(2001):
                v = 200.0 * i / 2000
                d = compute_ssd(v, w, ssd)
                assert abs(compute_ssd(invert_ssd(d, w, ssd), w, ssd) - d) <= 1e-6
        assert time.perf_counter() - start < 1.0


def test_c03_pid_law():
    with criterion(3, "PID law: hand step, zero steady-state error, P-only offset"):
        u, _ = pid_step(PidState(), PidGains(0.5, 0.1, 0.0), 55.0, 50.0, 0.05, windup_bound=1e9)
        assert abs(u - 2.525) <= 1e-12
        # integral action removes a constant road-load disturbance
        pi = speed_loop(PidGains(), 60.0, seconds=90, v0=40.0, disturbance=-0.5)
        assert abs(pi[-1] - 60.0) < 0.1
        clean = speed_loop(PidGains(), 60.0, seconds=90, v0=40.0)
        assert abs(clean[-1] - 60.0) < 0.1
        # without it the same disturbance leaves a persistent offset
        p_only = speed_loop(PidGains(0.8, 0.0, 0.05), 60.0, seconds=90, v0=40.0,
                            disturbance=-0.5)
        tail = p_only[-200:]
        assert min(60.0 - s for s in tail) > 0.5
        assert max(tail) - min(tail) < 1e-3  # settled, not still converging


def test_c04_collision_freedom():
    with criterion(4, "collision-freedom: replication pair + 50 seeded fuzz cases"):
        start = time.perf_counter()
        dry, wet = _replication_traces()
        for tr in (dry, wet):
            assert tr.status == "completed" and not tr.collisions
        failures = []
        for seed in FUZZ_SEEDS:
            tr = run_simulation(scenario_from_dict(fuzz_document(seed)))
            _traces.append(tr)
            if tr.collisions or tr.status != "completed":
                failures.append((seed, tr.status))
        assert not failures, failures
        assert len(FUZZ_SEEDS) == 50
        assert time.perf_counter() - start < 60.0


def test_c05_weather_direction():
    with criterion(5, "rain raises every travel time and lowers every median speed"):
        start = time.perf_counter()
        dry, wet = _replication_traces()
        rep = compare_runs(dry, wet, "no_rain", "heavy_rain")
        assert len(rep["vehicles"]) == 3
        for v in rep["vehicles"]:
            t = v["travel_time_s"]
            assert t["heavy_rain"] > t["no_rain"], v["id"]
            m_dry = v["speed"]["no_rain"]["median"]
            m_wet = v["speed"]["heavy_rain"]["median"]
            assert m_wet < m_dry, v["id"]
        assert time.perf_counter() - start < 10.0


def _exact_f(groups):
    fr = [[Fraction(x) for x in g] for g in groups]
    n, k = sum(map(len, fr)), len(fr)
    means = [sum(g) / len(g) for g in fr]
    grand = sum(map(sum, fr)) / n
    ssb = sum(len(g) * (m - grand) ** 2 for g, m in zip(fr, means))
    ssw = sum((x - m) ** 2 for g, m in zip(fr, means) for x in g)
    return (ssb / (k - 1)) / (ssw / (n - k))


def test_c06_anova_oracles():
    with criterion(6, "ANOVA and F tail match exact and quadrature oracles"):
        start = time.perf_counter()
        rng = random.Random(20240601)
        for _ in range(200):
            k = rng.randint(2, 5)
            groups = [[rng.uniform(0, 120) for _ in range(rng.randint(2, 20))] for _ in range(k)]
            exact = float(_exact_f(groups))
            got = one_way_anova(groups).f_statistic
            assert abs(got - exact) <= 1e-10 * exact
        r = one_way_anova([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert r.f_statistic == 27.0 and (r.df_between, r.df_within) == (2, 6)
        assert abs(r.p_value - 0.001) <= 1e-15
        with open(os.path.join(DATA, "f_survival_oracle.json")) as fh:
            rows = json.load(fh)["rows"]
        assert len(rows) == 50
        for row in rows:
            assert abs(f_survival(row["f"], row["d1"], row["d2"]) - row["p"]) <= 1e-8
        assert time.perf_counter() - start < 30.0


def test_c07_actuation_bounds():
    with criterion(7, "throttle/brake in [0, 1] and never both positive"):
        _replication_traces()
        if len(_traces) < 2 + len(FUZZ_SEEDS):
            _traces.extend(run_simulation(scenario_from_dict(fuzz_document(s)))
                           for s in FUZZ_SEEDS)
        n = 0
        for tr in _traces:
            for row in tr.rows:
                assert 0.0 <= row.throttle <= 1.0 and 0.0 <= row.brake <= 1.0
                assert not (row.throttle > 0.0 and row.brake > 0.0)
                n += 1
        assert n > 10000


def _tree(d):
    out = {}
    for name in sorted(os.listdir(d)):
        with open(os.path.join(d, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_c08_determinism():
    with criterion(8, "every subcommand is byte-for-byte reproducible"):
        start = time.perf_counter()
        base = tempfile.mkdtemp()
        try:
            def both(args):
                trees = []
                for i in (1, 2):
                    out = os.path.join(base, f"{args[0]}{i}")
                    code = cli_main(args + ["--out", out])
                    assert code == 0, (args, code)
                    trees.append(_tree(out))
                assert trees[0] == trees[1], args[0]
                return trees[0]
            dry = os.path.join(SCENARIOS, "noon_no_rain.json")
            wet = os.path.join(SCENARIOS, "noon_heavy_rain.json")
            run = both(["run", wet])
            both(["compare", dry, wet])
            trace = os.path.join(base, "trace.csv")
            with open(trace, "wb") as fh:
                fh.write(run["trace.csv"])
            both(["stats", trace, "--anova", "spacing"])
            tuned = both(["tune", os.path.join(SCENARIOS, "tune_step.json"), "--budget", "200"])
            assert "tuned_gains.json" in tuned
        finally:
            shutil.rmtree(base)
        assert time.perf_counter() - start < 60.0


def test_c09_emergency_boundary():
    with criterion(9, "emergency brake flips exactly at SSD; 1 m release hysteresis"):
        cfg = ControllerConfig()
        ssd = SsdParams()
        for w in (NO_RAIN, HEAVY_RAIN):
            for v in (5.0, 30.0, 57.3, 80.0, 130.0):
                boundary = compute_ssd(v, w, ssd)
                below = math.nextafter(boundary, -math.inf)
                for rng_m, want in ((below, True), (boundary, False),
                                    (boundary - 0.5, True), (boundary + 0.5, False)):
                    _, mode = upper_level(RadarReading(rng_m, 0.0, 0), v, 80.0, math.inf, w, ssd,
                                          cfg)
                    assert (mode == ControlMode.EMERGENCY_BRAKE) == want, (v, rng_m)
                # sweep: the flip happens once, at the boundary
                modes = []
                for i in range(-200, 201):
                    r = boundary + i * 0.01
                    _, mode = upper_level(RadarReading(r, 0.0, 0), v, 80.0, math.inf, w, ssd, cfg)
                    modes.append(mode == ControlMode.EMERGENCY_BRAKE)
                assert modes == [True] * 200 + [False] * 201
                # latched: held until the range clears SSD + hysteresis
                release = boundary + cfg.release_hysteresis
                for rng_m, held in ((boundary + 0.5, True),
                                    (math.nextafter(release, -math.inf), True),
                                    (release, False)):
                    ctl = AccController(cfg, w, ssd)
                    ctl.step(RadarReading(boundary - 0.1, 0.0, 0), v, 80.0, math.inf, 0.05)
                    assert ctl.mode == ControlMode.EMERGENCY_BRAKE
                    _, mode, _ = ctl.step(RadarReading(rng_m, 0.0, 1), v, 80.0, math.inf, 0.05)
                    assert (mode == ControlMode.EMERGENCY_BRAKE) == held, (v, rng_m)


def test_c10_tuner_contract():
    with criterion(10, "tuner: no worse than seeds on the step objective; surrogate to 1e-3"):
        start = time.perf_counter()
        obj = load_objective_file(os.path.join(SCENARIOS, "tune_step.json"))
        best, cost, hist = tune(obj, 200)
        seeded = min(h[-1] for h in hist[:GRID_SIZE + 1])
        assert cost <= seeded
        assert cost <= evaluate_gains(PidGains(), obj)
        assert len(hist) <= 200
        surrogate = TuneObjective(bounds={"kp": (0.0, 2.0), "ki": (0.0, 0.5), "kd": (0.0, 0.5)})
        g, c, _ = tune(surrogate, 200, cost_fn=lambda gg: (gg.K_p - 0.6) ** 2)
        assert abs(g.K_p - 0.6) < 1e-3
        assert time.perf_counter() - start < 120.0


if __name__ == "__main__":
    import sys
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    for t in tests:
        try:
            t()
        except Exception:
            pass
    for n in sorted(RESULTS):
        print(RESULTS[n])
    sys.exit(0 if all(r.startswith("PASS") for r in RESULTS.values()) else 1)
