"""Scenario description, JSON loading and scripted lead-vehicle behaviour."""

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .controller import ControllerConfig, PidGains, SsdParams, BRAKING_COEFF
from .dynamics import VehicleParams, VehicleState
from .sensing import RadarReading, WeatherCondition, WeatherName

STOP_TOLERANCE_M = 1.0
STOP_SPEED_KMH = 0.5


class ScenarioError(ValueError):
    """Invalid scenario document. ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class Role(str, Enum):
    SCRIPTED = "scripted"
    ACC = "acc_controlled"


@dataclass(frozen=True)
class CruiseAt:
    speed: float  # km/h


@dataclass(frozen=True)
class StopAt:
    position: float  # m
    duration: float  # s


@dataclass(frozen=True)
class SpeedZone:
    start: float  # m
    end: float  # m
    cap: float  # km/h


@dataclass(frozen=True)
class BehaviorScript:
    directives: tuple = ()

    @property
    def cruise_speed(self):
        for d in self.directives:
            if isinstance(d, CruiseAt):
                return d.speed
        return None

    @property
    def stops(self):
        return [d for d in self.directives if isinstance(d, StopAt)]

    @property
    def zones(self):
        return [d for d in self.directives if isinstance(d, SpeedZone)]

    def zone_cap(self, position):
        for z in self.zones:
            if z.start <= position <= z.end:
                return z.cap
        return math.inf


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    role: Role
    params: VehicleParams
    initial: VehicleState
    script: BehaviorScript = BehaviorScript()


@dataclass(frozen=True)
class Scenario:
    route_length: float
    dt: float
    weather: WeatherCondition
    vehicles: tuple
    cruise_target: float = 80.0
    time_ceiling: float = 120.0
    ssd: SsdParams = SsdParams()
    controller: ControllerConfig = ControllerConfig()
    seed: int = 0
    noise_enabled: bool = False
    range_jitter_m: float = 0.0
    document: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def vehicle_ids(self):
        return [v.id for v in self.vehicles]


class ScriptTracker:
    """Walks one vehicle through its script's stops.

    Stops are served in route order. A stop turns active once the vehicle is
    at or past ``position - STOP_TOLERANCE_M``; from then on the target is zero
    and the dwell clock starts when speed drops below ``STOP_SPEED_KMH``.
    """

    def __init__(self, script, start_position=0.0):
        self.script = script
        # stops already behind the starting point are never served
        self._stops = [s for s in script.stops if s.position >= start_position - STOP_TOLERANCE_M]
        self._next = 0
        self.dwell_started = None

    @property
    def pending_stop(self):
        if self._next < len(self._stops):
            return self._stops[self._next]
        return None

    @property
    def dwelling(self):
        return self.dwell_started is not None

    def target_speed(self, state, clock, default_cruise=math.inf):
        stop = self.pending_stop
        if stop is not None and state.position >= stop.position - STOP_TOLERANCE_M:
            if self.dwell_started is None:
                if state.speed >= STOP_SPEED_KMH:
                    return 0.0
                self.dwell_started = clock
            if clock - self.dwell_started < stop.duration:
                return 0.0
            self._next += 1
            self.dwell_started = None
        cruise = self.script.cruise_speed
        if cruise is None:
            cruise = default_cruise
        return min(cruise, self.script.zone_cap(state.position))

    def stop_line_reading(self, state, tick, standstill_margin):
        """Stationary virtual obstacle placed so that the stop comes at the line."""
        stop = self.pending_stop
        if stop is None or self.dwelling:
            return None
        rng = max(stop.position + standstill_margin - state.position, 0.0)
        return RadarReading(range=rng, relative_speed=-state.speed, measured_at_tick=tick)


def scripted_target_speed(script, state, clock, tracker=None):
    """Speed the script asks for at ``clock``: zero while dwelling at a stop,
    otherwise the cruise speed capped by any speed zone the vehicle is in."""
    if tracker is None:
        tracker = ScriptTracker(script)
    return tracker.target_speed(state, clock)


def zone_approach_cap(script, position, weather, ssd):
    """Braking envelope ahead of upcoming speed zones, in km/h.

    The speed from which the zone cap can still be reached at the zone entry
    by friction-limited braking.
    """
    fg = weather.friction_f + ssd.grade_G
    cap = math.inf
    for z in script.zones:
        if z.start > position:
            cap = min(cap, math.sqrt(z.cap * z.cap + BRAKING_COEFF * fg * (z.start - position)))
    return cap


# ---------------------------------------------------------------------------
# loading

_MISSING = object()


def _get(obj, key, path, default=_MISSING):
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    if key not in obj:
        if default is _MISSING:
            raise ScenarioError(f"{path}.{key}" if path else key, "required field missing")
        return default
    return obj[key]


def _number(value, path, *, positive=False, non_negative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(path, f"expected a finite number, got {value!r}")
    if positive and not value > 0:
        raise ScenarioError(path, f"must be > 0, got {value!r}")
    if non_negative and value < 0:
        raise ScenarioError(path, f"must be >= 0, got {value!r}")
    return float(value)


def _integer(value, path, *, non_negative=False):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if non_negative and value < 0:
        raise ScenarioError(path, f"must be >= 0, got {value!r}")
    return value


def _join(path, key):
    return f"{path}.{key}" if path else key


def _num_field(obj, key, path, default=_MISSING, **kw):
    return _number(_get(obj, key, path, default), _join(path, key), **kw)


def _parse_script(raw, path, route_length):
    if not isinstance(raw, list):
        raise ScenarioError(path, "expected a list of directives")
    directives = []
    cruise_seen = False
    last_key = -math.inf
    last_zone_end = -math.inf
    for i, item in enumerate(raw):
        p = f"{path}[{i}]"
        kind = _get(item, "type", p)
        if kind == "cruise_at":
            if cruise_seen:
                raise ScenarioError(p, "only one cruise_at directive is allowed")
            cruise_seen = True
            directives.append(CruiseAt(_num_field(item, "speed_kmh", p, positive=True)))
            continue
        if kind == "stop_at":
            pos = _num_field(item, "position_m", p, non_negative=True)
            dur = _num_field(item, "duration_s", p, non_negative=True)
            if pos > route_length:
                raise ScenarioError(_join(p, "position_m"), f"beyond route length {route_length}")
            directive, key = StopAt(pos, dur), pos
        elif kind == "speed_zone":
            start = _num_field(item, "start_m", p, non_negative=True)
            end = _num_field(item, "end_m", p, non_negative=True)
            cap = _num_field(item, "cap_kmh", p, positive=True)
            if end <= start:
                raise ScenarioError(p, f"zone end {end} must exceed start {start}")
            if end > route_length:
                raise ScenarioError(_join(p, "end_m"), f"beyond route length {route_length}")
            if start < last_zone_end:
                raise ScenarioError(p, "speed zones overlap")
            last_zone_end = end
            directive, key = SpeedZone(start, end, cap), start
        else:
            raise ScenarioError(_join(p, "type"), f"unknown directive {kind!r}")
        if key < last_key:
            raise ScenarioError(p, "directives must be sorted by position")
        last_key = key
        directives.append(directive)
    return BehaviorScript(tuple(directives))


def _parse_params(raw, path):
    defaults = VehicleParams()
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ScenarioError(path, "expected an object")
    return VehicleParams(
        max_accel=_num_field(raw, "max_accel_mps2", path, defaults.max_accel, positive=True),
        max_brake_decel=_num_field(raw, "max_brake_decel_mps2", path, defaults.max_brake_decel,
                                   positive=True),
        max_speed=_num_field(raw, "max_speed_kmh", path, defaults.max_speed, positive=True),
        length=_num_field(raw, "length_m", path, defaults.length, positive=True),
        actuator_lag=_num_field(raw, "actuator_lag_s", path, defaults.actuator_lag,
                                non_negative=True),
    )


def scenario_from_dict(doc):
    """Validate a parsed scenario document and build a :class:`Scenario`."""
    if not isinstance(doc, dict):
        raise ScenarioError("", "top level must be a JSON object")

    route_length = _num_field(doc, "route_length_m", "", positive=True)
    dt = _num_field(doc, "dt_s", "", 0.05, positive=True)
    ceiling = _num_field(doc, "time_ceiling_s", "", 120.0, positive=True)
    cruise = _num_field(doc, "cruise_target_kmh", "", 80.0, positive=True)

    w = _get(doc, "weather", "")
    name = _get(w, "name", "weather")
    if name not in {n.value for n in WeatherName}:
        raise ScenarioError("weather.name", f"unknown weather {name!r}; expected one of "
                            f"{sorted(n.value for n in WeatherName)}")
    friction = _num_field(w, "friction_f", "weather")
    if not 0.0 < friction <= 1.2:
        raise ScenarioError("weather.friction_f", f"must lie in (0, 1.2], got {friction!r}")
    weather = WeatherCondition(
        name=name,
        friction_f=friction,
        latency_ticks=_integer(_get(w, "latency_ticks", "weather", 0), "weather.latency_ticks",
                               non_negative=True),
    )

    s = _get(doc, "ssd", "", {})
    try:
        ssd = SsdParams(
            reaction_time_t=_num_field(s, "reaction_time_s", "ssd", 2.5, positive=True),
            grade_G=_num_field(s, "grade", "ssd", 0.0),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("ssd", str(exc)) from None
    if not abs(ssd.grade_G) < weather.friction_f:
        raise ScenarioError("ssd.grade", f"|grade| must be below friction_f {weather.friction_f}")

    p = _get(doc, "pid", "", {})
    c = _get(doc, "controller", "", {})
    defaults = ControllerConfig()
    try:
        gains = PidGains(
            K_p=_num_field(p, "kp", "pid", defaults.gains.K_p, non_negative=True),
            K_i=_num_field(p, "ki", "pid", defaults.gains.K_i, non_negative=True),
            K_d=_num_field(p, "kd", "pid", defaults.gains.K_d, non_negative=True),
        )
        windup = _get(p, "windup_bound", "pid", None)
        controller = ControllerConfig(
            gains=gains,
            u_scale=_num_field(p, "u_scale", "pid", defaults.u_scale, positive=True),
            windup_bound=None if windup is None else _number(windup, "pid.windup_bound",
                                                               non_negative=True),
            standstill_margin=_num_field(c, "standstill_margin_m", "controller",
                                         defaults.standstill_margin, non_negative=True),
            release_hysteresis=_num_field(c, "release_hysteresis_m", "controller",
                                          defaults.release_hysteresis, non_negative=True),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("pid", str(exc)) from None

    raw_vehicles = _get(doc, "vehicles", "")
    if not isinstance(raw_vehicles, list) or not raw_vehicles:
        raise ScenarioError("vehicles", "expected a non-empty list")
    vehicles = []
    seen = set()
    for i, rv in enumerate(raw_vehicles):
        path = f"vehicles[{i}]"
        vid = _get(rv, "id", path)
        if not isinstance(vid, str) or not vid:
            raise ScenarioError(_join(path, "id"), "expected a non-empty string")
        if vid in seen:
            raise ScenarioError(_join(path, "id"), f"duplicate vehicle id {vid!r}")
        seen.add(vid)
        try:
            role = Role(_get(rv, "role", path))
        except ValueError:
            raise ScenarioError(_join(path, "role"),
                                f"expected 'scripted' or 'acc_controlled', got {rv['role']!r}") from None
        if role is Role.ACC and i == 0:
            raise ScenarioError(_join(path, "role"), "the front vehicle cannot be acc_controlled")
        params = _parse_params(_get(rv, "params", path, None), _join(path, "params"))
        speed = _num_field(rv, "initial_speed_kmh", path, 0.0, non_negative=True)
        if speed > params.max_speed:
            raise ScenarioError(_join(path, "initial_speed_kmh"), "exceeds params.max_speed_kmh")
        initial = VehicleState(
            position=_num_field(rv, "initial_position_m", path, non_negative=True),
            speed=speed,
        )
        script = _parse_script(_get(rv, "script", path, []), _join(path, "script"), route_length)
        target = script.cruise_speed if script.cruise_speed is not None else cruise
        if target > params.max_speed:
            raise ScenarioError(_join(path, "params.max_speed_kmh"),
                                f"below the cruise target {target} km/h")
        vehicles.append(VehicleSpec(vid, role, params, initial, script))

    for front, rear in zip(vehicles, vehicles[1:]):
        gap = front.initial.position - front.params.length - rear.initial.position
        if not gap > 0:
            idx = vehicles.index(rear)
            raise ScenarioError(
                f"vehicles[{idx}].initial_position_m",
                f"vehicles {front.id!r} and {rear.id!r} overlap (initial gap {gap:g} m); "
                "list vehicles front to rear with positive gaps")

    seed = _integer(_get(doc, "seed", "", 0), "seed")
    noise = _get(doc, "noise", "", {})
    enabled = _get(noise, "enabled", "noise", False)
    if not isinstance(enabled, bool):
        raise ScenarioError("noise.enabled", "expected true or false")
    jitter = _num_field(noise, "range_jitter_m", "noise", 0.0, non_negative=True)

    scenario = Scenario(
        route_length=route_length, dt=dt, weather=weather, vehicles=tuple(vehicles),
        cruise_target=cruise, time_ceiling=ceiling, ssd=ssd, controller=controller,
        seed=seed, noise_enabled=enabled, range_jitter_m=jitter,
    )
    return replace(scenario, document=scenario_to_dict(scenario))


def load_scenario(document):
    """Parse and validate scenario JSON text."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"not valid JSON: {exc}") from None
    return scenario_from_dict(doc)


def load_scenario_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def _script_to_list(script):
    out = []
    for d in script.directives:
        if isinstance(d, CruiseAt):
            out.append({"type": "cruise_at", "speed_kmh": d.speed})
        elif isinstance(d, StopAt):
            out.append({"type": "stop_at", "position_m": d.position, "duration_s": d.duration})
        else:
            out.append({"type": "speed_zone", "start_m": d.start, "end_m": d.end, "cap_kmh": d.cap})
    return out


def scenario_to_dict(scenario):
    """Normalised document with every default filled in."""
    c = scenario.controller
    return {
        "route_length_m": scenario.route_length,
        "dt_s": scenario.dt,
        "time_ceiling_s": scenario.time_ceiling,
        "weather": {
            "name": scenario.weather.name.value,
            "friction_f": scenario.weather.friction_f,
            "latency_ticks": scenario.weather.latency_ticks,
        },
        "cruise_target_kmh": scenario.cruise_target,
        "ssd": {"reaction_time_s": scenario.ssd.reaction_time_t, "grade": scenario.ssd.grade_G},
        "pid": {
            "kp": c.gains.K_p, "ki": c.gains.K_i, "kd": c.gains.K_d,
            "u_scale": c.u_scale, "windup_bound": c.windup_bound,
        },
        "controller": {
            "standstill_margin_m": c.standstill_margin,
            "release_hysteresis_m": c.release_hysteresis,
        },
        "vehicles": [
            {
                "id": v.id,
                "role": v.role.value,
                "initial_position_m": v.initial.position,
                "initial_speed_kmh": v.initial.speed,
                "params": {
                    "max_accel_mps2": v.params.max_accel,
                    "max_brake_decel_mps2": v.params.max_brake_decel,
                    "max_speed_kmh": v.params.max_speed,
                    "length_m": v.params.length,
                    "actuator_lag_s": v.params.actuator_lag,
                },
                "script": _script_to_list(v.script),
            }
            for v in scenario.vehicles
        ],
        "seed": scenario.seed,
        "noise": {"enabled": scenario.noise_enabled, "range_jitter_m": scenario.range_jitter_m},
    }


def with_gains(scenario, gains):
    """Copy of ``scenario`` with every vehicle running on ``gains``."""
    return replace(scenario, controller=replace(scenario.controller, gains=gains))
