"""Fixed-step platoon simulation and its trace."""

import csv
import io
import json
import random
from dataclasses import dataclass, field, asdict

from .controller import AccController, ControlMode, compute_ssd
from .dynamics import (
    command_to_acceleration, integrate_step, lagged_acceleration,
)
from .scenario import Role, ScriptTracker, zone_approach_cap
from .sensing import RadarBuffer, measure

TRACE_HEADER = ("tick", "time_s", "vehicle_id", "position_m", "speed_kmh", "accel_mps2",
                "throttle", "brake", "gap_m", "ssd_m", "mode")

COMPLETED = "completed"
COLLISION = "collision"
TIMEOUT = "timeout"


def fmt(x):
    """Six significant digits, no negative zero."""
    if x is None:
        return ""
    if x == 0:
        return "0"
    return f"{x:.6g}"


@dataclass
class TraceRow:
    tick: int
    time_s: float
    vehicle_id: str
    position_m: float
    speed_kmh: float
    accel_mps2: float
    throttle: float
    brake: float
    gap_m: float  # None without a leader
    ssd_m: float
    mode: str
    target_kmh: float = None  # in-memory only, not part of the CSV

    def csv_fields(self):
        return [str(self.tick), fmt(self.time_s), self.vehicle_id, fmt(self.position_m),
                fmt(self.speed_kmh), fmt(self.accel_mps2), fmt(self.throttle), fmt(self.brake),
                fmt(self.gap_m), fmt(self.ssd_m), self.mode]


@dataclass(frozen=True)
class CollisionEvent:
    tick: int
    time_s: float
    leader_id: str
    follower_id: str
    gap_m: float
    leader_speed_kmh: float
    follower_speed_kmh: float


@dataclass
class TraceLog:
    vehicle_ids: list
    rows: list = field(default_factory=list)
    travel_times: dict = field(default_factory=dict)
    collisions: list = field(default_factory=list)
    status: str = COMPLETED
    ticks: int = 0
    dt: float = None
    config: dict = field(default_factory=dict)

    @property
    def failed(self):
        return self.status != COMPLETED

    def rows_for(self, vehicle_id):
        return [r for r in self.rows if r.vehicle_id == vehicle_id]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in self.rows:
            writer.writerow(row.csv_fields())
        return buf.getvalue()

    def summary(self):
        return {
            "status": self.status,
            "ticks": self.ticks,
            "travel_times_s": {vid: self.travel_times.get(vid) for vid in self.vehicle_ids},
            "collisions": [asdict(c) for c in self.collisions],
            "config": self.config,
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2) + "\n"


class TraceFormatError(ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _float(text, line, column):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(line, f"column {column!r}: not a number: {text!r}") from None


def read_trace_csv(text):
    """Parse trace CSV text back into a :class:`TraceLog` (rows only).

    Vehicle order is taken from first appearance; ``dt`` from the time step
    between the first two ticks.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError(1, "empty trace file") from None
    if tuple(header) != TRACE_HEADER:
        raise TraceFormatError(1, f"unexpected header {','.join(header)!r}")
    rows = []
    order = []
    times = {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(TRACE_HEADER):
            raise TraceFormatError(lineno, f"expected {len(TRACE_HEADER)} fields, got {len(rec)}")
        try:
            tick = int(rec[0])
        except ValueError:
            raise TraceFormatError(lineno, f"column 'tick': not an integer: {rec[0]!r}") from None
        values = [_float(rec[i], lineno, TRACE_HEADER[i]) for i in (1, 3, 4, 5, 6, 7, 8, 9)]
        if any(v is None for i, v in enumerate(values) if i != 6):
            raise TraceFormatError(lineno, "missing numeric value")
        if rec[10] not in {m.value for m in ControlMode}:
            raise TraceFormatError(lineno, f"unknown mode {rec[10]!r}")
        t, pos, spd, acc, thr, brk, gap, ssd = values
        rows.append(TraceRow(tick, t, rec[2], pos, spd, acc, thr, brk, gap, ssd, rec[10]))
        if rec[2] not in order:
            order.append(rec[2])
        times.setdefault(tick, t)
    if not rows:
        raise TraceFormatError(2, "trace has no data rows")
    ticks = sorted(times)
    dt = None
    if len(ticks) > 1:
        dt = (times[ticks[1]] - times[ticks[0]]) / (ticks[1] - ticks[0])
    return TraceLog(vehicle_ids=order, rows=rows, ticks=ticks[-1] + 1, dt=dt)


def detect_collision(leader, follower, leader_length, tick=0, dt=0.0,
                     leader_id="leader", follower_id="follower"):
    """Return a :class:`CollisionEvent` if the bumpers overlap, else ``None``.

    Touching (gap exactly zero) is not a collision.
    """
    gap = leader.position - leader_length - follower.position
    if gap < 0:
        return CollisionEvent(tick, tick * dt, leader_id, follower_id, gap,
                              leader.speed, follower.speed)
    return None


class _Agent:
    def __init__(self, vehicle, scenario, rng):
        self.vehicle = vehicle
        self.state = vehicle.initial
        self.controller = AccController(scenario.controller, scenario.weather, scenario.ssd)
        self.tracker = ScriptTracker(vehicle.script, start_position=vehicle.initial.position)
        jitter = scenario.range_jitter_m if scenario.noise_enabled else 0.0
        self.radar = RadarBuffer(scenario.weather, jitter_m=jitter, rng=rng)
        self.radar_leader = None
        self.finished_at = None


def run_simulation(scenario):
    """Run ``scenario`` to completion, collision or time ceiling.

    Each tick updates vehicles front to rear. Every vehicle senses the
    pre-update snapshot of its leader; acc_controlled vehicles see it through
    the weather's latency, scripted vehicles see it directly.
    """
    dt = scenario.dt
    rng = random.Random(scenario.seed)
    agents = [_Agent(v, scenario, rng) for v in scenario.vehicles]
    trace = TraceLog(vehicle_ids=scenario.vehicle_ids, dt=dt, config=scenario.document)
    trace.travel_times = {a.vehicle.id: None for a in agents}
    max_ticks = int(round(scenario.time_ceiling / dt))
    margin = scenario.controller.standstill_margin

    # vehicles already past the finish line at t=0
    for a in agents:
        if a.state.position >= scenario.route_length:
            a.finished_at = 0.0
            trace.travel_times[a.vehicle.id] = 0.0

    tick = 0
    while tick < max_ticks:
        active = [a for a in agents if a.finished_at is None]
        if not active:
            break
        clock = tick * dt
        snapshot = {id(a): a.state for a in active}
        new_states = {}
        for idx, a in enumerate(active):
            own = snapshot[id(a)]
            leader = active[idx - 1] if idx > 0 else None

            reading = None
            gap = None
            if leader is not None:
                lstate = snapshot[id(leader)]
                true_reading = measure(own, lstate, leader.vehicle.params, tick)
                gap = lstate.position - leader.vehicle.params.length - own.position
                if a.vehicle.role is Role.ACC:
                    if a.radar_leader != leader.vehicle.id:
                        a.radar.clear()
                        a.radar_leader = leader.vehicle.id
                    a.radar.push(true_reading)
                    reading = a.radar.read(tick)
                else:
                    reading = true_reading

            script_cap = a.tracker.target_speed(own, clock, scenario.cruise_target)
            stop_reading = a.tracker.stop_line_reading(own, tick, margin)
            if stop_reading is not None and (reading is None or stop_reading.range < reading.range):
                reading = stop_reading
            cruise = a.vehicle.script.cruise_speed or scenario.cruise_target
            route_cap = min(script_cap,
                            zone_approach_cap(a.vehicle.script, own.position, scenario.weather,
                                              scenario.ssd))

            target, mode, cmd = a.controller.step(reading, own.speed, cruise, route_cap, dt)
            commanded = command_to_acceleration(cmd, a.vehicle.params, own)
            applied = lagged_acceleration(own, commanded, a.vehicle.params, dt)
            new = integrate_step(own, applied, dt, a.vehicle.params.max_speed)
            new_states[id(a)] = new

            trace.rows.append(TraceRow(
                tick=tick, time_s=clock, vehicle_id=a.vehicle.id,
                position_m=own.position, speed_kmh=own.speed, accel_mps2=new.accel,
                throttle=cmd.throttle, brake=cmd.brake, gap_m=gap,
                ssd_m=compute_ssd(own.speed, scenario.weather, scenario.ssd),
                mode=mode.value, target_kmh=target,
            ))

        for a in active:
            a.state = new_states[id(a)]
        tick += 1

        for front, rear in zip(active, active[1:]):
            event = detect_collision(front.state, rear.state, front.vehicle.params.length, tick, dt,
                                     front.vehicle.id, rear.vehicle.id)
            if event is not None:
                trace.collisions.append(event)
        if trace.collisions:
            trace.status = COLLISION
            break

        for a in active:
            if a.state.position >= scenario.route_length:
                a.finished_at = round(tick * dt, 9)
                trace.travel_times[a.vehicle.id] = a.finished_at

    trace.ticks = tick
    if trace.status == COMPLETED and any(a.finished_at is None for a in agents):
        trace.status = TIMEOUT
    return trace
