"""Two-level adaptive cruise controller.

The upper level turns the measured gap into a target speed, falling back to
full braking when the gap is inside the stopping distance. The lower level
runs a discrete PID on the speed error and splits its output into throttle
or brake.
"""

import math
from dataclasses import dataclass
from enum import Enum

from .dynamics import ActuatorCommand

# 0.278 converts km/h to m/s; 254 ~ 2 * g * 3.6^2.
REACTION_COEFF = 0.278
BRAKING_COEFF = 254.0

EPS_GAIN = 1e-9
HOLD_SPEED_KMH = 0.5  # below this, a zero target is held with the brake


class ControlMode(str, Enum):
    CRUISE = "cruise"
    FOLLOW = "follow"
    EMERGENCY_BRAKE = "emergency_brake"


@dataclass(frozen=True)
class SsdParams:
    reaction_time_t: float = 2.5  # s
    grade_G: float = 0.0  # decimal fraction, + is uphill

    def __post_init__(self):
        if not self.reaction_time_t > 0:
            raise ValueError(f"reaction_time_t must be positive, got {self.reaction_time_t!r}")


@dataclass(frozen=True)
class PidGains:
    K_p: float = 0.8
    K_i: float = 0.04
    K_d: float = 0.05

    def __post_init__(self):
        for name in ("K_p", "K_i", "K_d"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    def as_tuple(self):
        return (self.K_p, self.K_i, self.K_d)


@dataclass(frozen=True)
class PidState:
    integral_accum: float = 0.0  # km/h * s
    prev_error: float = 0.0  # km/h
    initialized: bool = False


@dataclass(frozen=True)
class ControllerConfig:
    gains: PidGains = PidGains()
    u_scale: float = 10.0  # km/h of control signal per unit pedal
    windup_bound: float = None  # km/h * s; None tracks u_scale / K_i
    standstill_margin: float = 2.0  # m
    release_hysteresis: float = 1.0  # m

    def __post_init__(self):
        if not self.u_scale > 0:
            raise ValueError(f"u_scale must be positive, got {self.u_scale!r}")
        if self.windup_bound is not None and not self.windup_bound >= 0:
            raise ValueError(f"windup_bound must be >= 0, got {self.windup_bound!r}")
        if self.standstill_margin < 0 or self.release_hysteresis < 0:
            raise ValueError("standstill_margin and release_hysteresis must be >= 0")

    @property
    def integral_bound(self):
        if self.windup_bound is None:
            return default_windup_bound(self.gains, self.u_scale)
        return self.windup_bound


def default_windup_bound(gains, u_scale):
    """Integral bound at which the integral term alone saturates the pedals."""
    return u_scale / max(gains.K_i, EPS_GAIN)


def _friction_grade(weather, ssd):
    fg = weather.friction_f + ssd.grade_G
    if not fg > 0:
        raise ValueError(f"friction + grade must be positive, got {fg!r}")
    return fg


def compute_ssd(speed_v, weather, ssd):
    """Stopping distance in metres from ``speed_v`` km/h: reaction plus braking."""
    if speed_v < 0:
        raise ValueError(f"speed must be >= 0, got {speed_v!r}")
    fg = _friction_grade(weather, ssd)
    return REACTION_COEFF * ssd.reaction_time_t * speed_v + speed_v * speed_v / (BRAKING_COEFF * fg)


def compute_gap(present_distance_Dp, ssd_value):
    """Signed clearance beyond the stopping distance; negative is unsafe."""
    return present_distance_Dp - ssd_value


def invert_ssd(available_distance, weather, ssd):
    """Highest speed in km/h whose stopping distance equals ``available_distance``."""
    if available_distance < 0:
        raise ValueError(f"available distance must be >= 0, got {available_distance!r}")
    if available_distance == 0:
        return 0.0
    a = 1.0 / (BRAKING_COEFF * _friction_grade(weather, ssd))
    b = REACTION_COEFF * ssd.reaction_time_t
    c = available_distance
    # positive root of a v^2 + b v - c = 0, written to avoid cancellation
    return 2.0 * c / (b + math.sqrt(b * b + 4.0 * a * c))


def upper_level(reading, own_speed, cruise_target, route_speed_cap, weather, ssd_params,
                config=ControllerConfig(), latched=False):
    """Pick the target speed and control mode for one tick.

    ``reading`` is the nearest obstacle ahead or ``None``. ``latched`` says
    whether the previous tick was already in emergency braking; a latched
    brake is only released once the range clears the stopping distance by
    ``config.release_hysteresis``.
    """
    free = min(cruise_target, route_speed_cap)
    if reading is None:
        return free, ControlMode.CRUISE

    stopping = compute_ssd(own_speed, weather, ssd_params)
    threshold = stopping + config.release_hysteresis if latched else stopping
    if reading.range < threshold:
        return 0.0, ControlMode.EMERGENCY_BRAKE

    gap_speed = invert_ssd(max(reading.range - config.standstill_margin, 0.0), weather, ssd_params)
    if gap_speed < free:
        return gap_speed, ControlMode.FOLLOW
    return free, ControlMode.CRUISE


def pid_step(state, gains, target_S_t, current_S_c, dt, windup_bound, output_limit=None):
    """One step of the discrete PID law on speed error.

    Rectangular integration with the accumulator clamped to
    ``+-windup_bound``; backward-difference derivative, zero on the first call.
    With ``output_limit`` set, the accumulator is also frozen on any step where
    ``|u|`` exceeds it and the error pushes further into saturation.
    Returns ``(u, new_state)``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    e = target_S_t - current_S_c
    derivative = (e - state.prev_error) / dt if state.initialized else 0.0
    integral = state.integral_accum + e * dt
    integral = min(max(integral, -windup_bound), windup_bound)
    u = gains.K_p * e + gains.K_i * integral + gains.K_d * derivative
    if output_limit is not None and abs(u) > output_limit and u * e > 0:
        integral = state.integral_accum
        u = gains.K_p * e + gains.K_i * integral + gains.K_d * derivative
    return u, PidState(integral_accum=integral, prev_error=e, initialized=True)


def lower_level(u, mode, u_scale=10.0):
    """Split the control signal into a throttle or a brake command."""
    if mode == ControlMode.EMERGENCY_BRAKE:
        return ActuatorCommand(throttle=0.0, brake=1.0)
    if u >= 0:
        return ActuatorCommand(throttle=min(u / u_scale, 1.0), brake=0.0)
    return ActuatorCommand(throttle=0.0, brake=min(-u / u_scale, 1.0))


class AccController:
    """Stateful wrapper owned by one vehicle in one run."""

    def __init__(self, config, weather, ssd_params):
        self.config = config
        self.weather = weather
        self.ssd_params = ssd_params
        self.pid = PidState()
        self.mode = ControlMode.CRUISE

    def reset(self):
        self.pid = PidState()
        self.mode = ControlMode.CRUISE

    def step(self, reading, own_speed, cruise_target, route_speed_cap, dt):
        """Return ``(target_speed, mode, command)`` for this tick."""
        latched = self.mode == ControlMode.EMERGENCY_BRAKE
        target, mode = upper_level(reading, own_speed, cruise_target, route_speed_cap,
                                   self.weather, self.ssd_params, self.config, latched)
        self.mode = mode
        if target <= 0.0 and own_speed < HOLD_SPEED_KMH:
            # standstill hold: park on the brake and drop stale integral charge
            self.pid = PidState()
            return target, mode, ActuatorCommand(throttle=0.0, brake=1.0)
        u, self.pid = pid_step(self.pid, self.config.gains, target, own_speed, dt,
                               self.config.integral_bound, self.config.u_scale)
        return target, mode, lower_level(u, mode, self.config.u_scale)
