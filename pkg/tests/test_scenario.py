import copy
import json
import math

import pytest
from hypothesis import given, strategies as st

from accsim.controller import PidGains
from accsim.dynamics import VehicleState
from accsim.scenario import (
    BehaviorScript, CruiseAt, Role, ScenarioError, ScriptTracker, SpeedZone, StopAt,
    load_scenario, load_scenario_file, scenario_from_dict, scenario_to_dict, scripted_target_speed,
    with_gains, zone_approach_cap,
)
from accsim.sensing import NO_RAIN
from accsim.controller import SsdParams

MINIMAL = {
    "route_length_m": 200,
    "dt_s": 0.05,
    "weather": {"name": "no_rain", "friction_f": 0.7},
    "vehicles": [{"id": "solo", "role": "scripted", "initial_position_m": 0,
                  "initial_speed_kmh": 0, "script": []}],
}


def doc(**changes):
    d = copy.deepcopy(MINIMAL)
    d.update(changes)
    return d


def test_minimal_document_gets_defaults():
    sc = scenario_from_dict(MINIMAL)
    assert sc.cruise_target == 80
    assert sc.time_ceiling == 120
    assert sc.weather.latency_ticks == 0
    assert sc.controller.gains == PidGains()
    assert sc.vehicles[0].role is Role.SCRIPTED
    assert sc.seed == 0 and not sc.noise_enabled


def test_shipped_replication_scenario(scenario_path):
    sc = load_scenario_file(scenario_path("noon_no_rain.json"))
    assert len(sc.vehicles) == 3
    assert sc.route_length == 200
    assert sc.cruise_target == 80
    assert sc.vehicle_ids == ["leading_vehicle_2", "leading_vehicle_1", "ego"]
    assert [v.role for v in sc.vehicles] == [Role.SCRIPTED, Role.SCRIPTED, Role.ACC]


def test_replication_pair_differs_only_in_weather(scenario_path):
    with open(scenario_path("noon_no_rain.json")) as fh:
        a = json.load(fh)
    with open(scenario_path("noon_heavy_rain.json")) as fh:
        b = json.load(fh)
    assert a["weather"] != b["weather"]
    a.pop("weather"), b.pop("weather")
    assert a == b


def test_overlap_fixture_names_vehicles(scenario_path):
    with pytest.raises(ScenarioError) as exc:
        load_scenario_file(scenario_path("overlap_vehicles.json"))
    assert "leading_vehicle_2" in str(exc.value) and "leading_vehicle_1" in str(exc.value)


def _two(pos_a, pos_b):
    veh = MINIMAL["vehicles"][0]
    return doc(vehicles=[dict(veh, id="a", initial_position_m=pos_a),
                         dict(veh, id="b", initial_position_m=pos_b)])


def test_same_position_rejected():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(_two(10, 10))
    assert "'a'" in str(exc.value) and "'b'" in str(exc.value)


@pytest.mark.parametrize("change,path", [
    ({"dt_s": 0}, "dt_s"),
    ({"dt_s": "fast"}, "dt_s"),
    ({"route_length_m": -5}, "route_length_m"),
    ({"weather": {"name": "fog", "friction_f": 0.5}}, "weather.name"),
    ({"weather": {"name": "no_rain", "friction_f": 2.0}}, "weather.friction_f"),
    ({"vehicles": []}, "vehicles"),
    ({"pid": {"kp": -1}}, "pid"),
])
def test_field_paths_in_errors(change, path):
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(doc(**change))
    assert exc.value.path.startswith(path)


def _script(*directives):
    veh = dict(MINIMAL["vehicles"][0], script=list(directives))
    return doc(vehicles=[veh])


def test_overlapping_zones_rejected():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(_script(
            {"type": "speed_zone", "start_m": 10, "end_m": 50, "cap_kmh": 30},
            {"type": "speed_zone", "start_m": 40, "end_m": 60, "cap_kmh": 20}))
    assert "vehicles[0].script" in exc.value.path


@pytest.mark.parametrize("directive", [
    {"type": "stop_at", "position_m": 250, "duration_s": 1},
    {"type": "stop_at", "position_m": 50, "duration_s": -1},
    {"type": "speed_zone", "start_m": 60, "end_m": 50, "cap_kmh": 30},
    {"type": "teleport"},
])
def test_bad_directives(directive):
    with pytest.raises(ScenarioError):
        scenario_from_dict(_script(directive))


def test_unsorted_directives_rejected():
    with pytest.raises(ScenarioError):
        scenario_from_dict(_script(
            {"type": "stop_at", "position_m": 120, "duration_s": 1},
            {"type": "stop_at", "position_m": 60, "duration_s": 1}))


def test_front_vehicle_cannot_be_acc():
    veh = dict(MINIMAL["vehicles"][0], role="acc_controlled")
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc(vehicles=[veh]))


def test_invalid_json_text():
    with pytest.raises(ScenarioError):
        load_scenario("{not json")


def test_round_trip_through_dict(scenario_path):
    sc = load_scenario_file(scenario_path("noon_heavy_rain.json"))
    again = scenario_from_dict(scenario_to_dict(sc))
    assert again == sc


def test_with_gains_only_touches_gains(scenario_path):
    sc = load_scenario_file(scenario_path("noon_no_rain.json"))
    g = PidGains(1.0, 0.1, 0.2)
    sc2 = with_gains(sc, g)
    assert sc2.controller.gains == g
    assert sc2.vehicles == sc.vehicles and sc2.weather == sc.weather


# scripted target speed

def test_cruise_only():
    s = BehaviorScript([CruiseAt(80)])
    assert scripted_target_speed(s, VehicleState(position=10, speed=50), 0.0) == 80


def test_zone_binds():
    s = BehaviorScript([CruiseAt(80), SpeedZone(60, 90, 30)])
    assert scripted_target_speed(s, VehicleState(position=70, speed=30), 0.0) == 30
    assert scripted_target_speed(s, VehicleState(position=95, speed=30), 0.0) == 80


def test_stop_dwell_bookkeeping():
    s = BehaviorScript([CruiseAt(80), StopAt(100, 5)])
    tr = ScriptTracker(s)
    at_line = VehicleState(position=99.5, speed=0.0)
    assert tr.target_speed(at_line, 10.0) == 0.0  # dwell starts here
    assert tr.target_speed(at_line, 12.0) == 0.0  # 2 s elapsed of 5
    assert tr.dwelling
    assert tr.target_speed(at_line, 15.0) == 80  # dwell over
    assert tr.pending_stop is None


def test_stop_waits_for_standstill():
    s = BehaviorScript([CruiseAt(80), StopAt(100, 1)])
    tr = ScriptTracker(s)
    assert tr.target_speed(VehicleState(position=100, speed=10), 0.0) == 0.0
    assert not tr.dwelling


def test_stops_behind_start_are_skipped():
    tr = ScriptTracker(BehaviorScript([StopAt(20, 5)]), start_position=50)
    assert tr.pending_stop is None


def test_stop_line_reading():
    tr = ScriptTracker(BehaviorScript([StopAt(100, 5)]))
    r = tr.stop_line_reading(VehicleState(position=60, speed=40), 3, 2.0)
    assert r.range == pytest.approx(42.0)
    assert r.measured_at_tick == 3


def test_zone_approach_cap():
    s = BehaviorScript([SpeedZone(100, 150, 30)])
    ssd = SsdParams()
    assert zone_approach_cap(s, 100 - 1e-9, NO_RAIN, ssd) == pytest.approx(30)
    assert zone_approach_cap(s, 100, NO_RAIN, ssd) == math.inf  # inside: the zone cap rules
    far = zone_approach_cap(s, 0, NO_RAIN, ssd)
    assert far == pytest.approx(math.sqrt(30 ** 2 + 254 * 0.7 * 100))
    assert zone_approach_cap(s, 160, NO_RAIN, ssd) == math.inf


@given(pos=st.floats(0, 200))
def test_target_never_exceeds_cruise_or_zone(pos):
    s = BehaviorScript([CruiseAt(70), SpeedZone(50, 80, 25)])
    t = scripted_target_speed(s, VehicleState(position=pos, speed=20), 0.0)
    assert t <= 70
    if 50 <= pos <= 80:
        assert t <= 25
