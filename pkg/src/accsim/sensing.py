"""Radar ranging and weather-dependent perception latency."""

from dataclasses import dataclass
from enum import Enum

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value


class WeatherName(str, Enum):
    NO_RAIN = "no_rain"
    HEAVY_RAIN = "heavy_rain"


@dataclass(frozen=True)
class WeatherCondition:
    name: WeatherName
    friction_f: float
    latency_ticks: int = 0

    def __post_init__(self):
        object.__setattr__(self, "name", WeatherName(self.name))
        if not 0.0 < self.friction_f <= 1.2:
            raise ValueError(f"friction_f must lie in (0, 1.2], got {self.friction_f!r}")
        if isinstance(self.latency_ticks, bool) or not isinstance(self.latency_ticks, int) \
                or self.latency_ticks < 0:
            raise ValueError(f"latency_ticks must be a non-negative integer, got {self.latency_ticks!r}")


# Conventional dry/wet pavement figures. Scenario files carry their own copy.
NO_RAIN = WeatherCondition(WeatherName.NO_RAIN, friction_f=0.70, latency_ticks=0)
HEAVY_RAIN = WeatherCondition(WeatherName.HEAVY_RAIN, friction_f=0.40, latency_ticks=8)
PRESETS = {w.name.value: w for w in (NO_RAIN, HEAVY_RAIN)}


@dataclass(frozen=True)
class RadarReading:
    range: float  # m, bumper to bumper
    relative_speed: float  # km/h, leader minus own
    measured_at_tick: int

    @property
    def round_trip_time(self):
        """Echo delay in seconds that corresponds to ``range``."""
        return 2.0 * self.range / SPEED_OF_LIGHT


def time_of_flight_range(round_trip_time):
    """Distance in metres to a reflector whose echo returns after ``round_trip_time`` seconds."""
    if round_trip_time < 0:
        raise ValueError(f"round-trip time must be non-negative, got {round_trip_time!r}")
    return SPEED_OF_LIGHT * round_trip_time / 2.0


def measure(own, leader, leader_params, tick):
    """Ideal radar return from ``own`` to the rear bumper of ``leader``."""
    if leader.position < own.position:
        raise ValueError(
            f"leader at {leader.position} m is behind the sensing vehicle at {own.position} m")
    gap = leader.position - own.position - leader_params.length
    return RadarReading(
        range=max(gap, 0.0),
        relative_speed=leader.speed - own.speed,
        measured_at_tick=tick,
    )


def delayed_reading(history, weather, tick):
    """Return the reading that is ``weather.latency_ticks`` old at ``tick``.

    ``history`` is ordered oldest first. Before enough samples exist the
    oldest one is returned.
    """
    if not history:
        raise ValueError("no radar readings recorded yet")
    wanted = tick - weather.latency_ticks
    # history is appended once per tick, so scan back from the newest entry
    for reading in reversed(history):
        if reading.measured_at_tick <= wanted:
            return reading
    return history[0]


class RadarBuffer:
    """Per-vehicle reading history, trimmed to what the latency can reach."""

    def __init__(self, weather, jitter_m=0.0, rng=None):
        self.weather = weather
        self.jitter_m = jitter_m
        self.rng = rng
        self._history = []

    def push(self, reading):
        if self.jitter_m > 0.0 and self.rng is not None:
            noisy = reading.range + self.rng.uniform(-self.jitter_m, self.jitter_m)
            reading = RadarReading(max(noisy, 0.0), reading.relative_speed, reading.measured_at_tick)
        self._history.append(reading)
        keep = self.weather.latency_ticks + 1
        if len(self._history) > keep:
            del self._history[:-keep]

    def clear(self):
        self._history.clear()

    def read(self, tick):
        return delayed_reading(self._history, self.weather, tick)
