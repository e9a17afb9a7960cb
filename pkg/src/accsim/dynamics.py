"""Point-mass longitudinal vehicle model.

Speeds cross the API in km/h, accelerations in m/s^2 and positions in m.
Integration happens in m/s and is converted once per step.
"""

from dataclasses import dataclass

KMH_PER_MPS = 3.6


@dataclass(frozen=True)
class VehicleParams:
    max_accel: float = 3.0  # m/s^2
    max_brake_decel: float = 8.0  # m/s^2
    max_speed: float = 220.0  # km/h
    length: float = 4.7  # m
    actuator_lag: float = 0.5  # s, first-order powertrain/brake lag; 0 disables

    def __post_init__(self):
        for name in ("max_accel", "max_brake_decel", "max_speed", "length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)!r}")
        if not self.actuator_lag >= 0:
            raise ValueError(f"actuator_lag must be >= 0, got {self.actuator_lag!r}")


@dataclass(frozen=True)
class VehicleState:
    position: float = 0.0  # m along the route
    speed: float = 0.0  # km/h
    accel: float = 0.0  # m/s^2, effective value of the last step


@dataclass(frozen=True)
class ActuatorCommand:
    throttle: float = 0.0
    brake: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.throttle <= 1.0 and 0.0 <= self.brake <= 1.0):
            raise ValueError(f"throttle/brake outside [0, 1]: {self.throttle}, {self.brake}")
        if self.throttle > 0.0 and self.brake > 0.0:
            raise ValueError("throttle and brake engaged together")


def command_to_acceleration(cmd, params, state):
    """Map a pedal command to a longitudinal acceleration in m/s^2.

    The map is affine in the pedals. No positive acceleration is produced at
    the speed cap and no negative one at standstill.
    """
    a = cmd.throttle * params.max_accel - cmd.brake * params.max_brake_decel
    if a > 0.0 and state.speed >= params.max_speed:
        return 0.0
    if a < 0.0 and state.speed <= 0.0:
        return 0.0
    return a


def lagged_acceleration(state, commanded, params, dt):
    """Acceleration actually delivered this step.

    The drivetrain follows the command through a first-order lag whose memory
    is the previous step's realised acceleration (``state.accel``).
    """
    if params.actuator_lag <= 0.0:
        return commanded
    alpha = min(dt / params.actuator_lag, 1.0)
    a = state.accel + alpha * (commanded - state.accel)
    # same saturation rules as the pedal map
    if a > 0.0 and state.speed >= params.max_speed:
        return 0.0
    if a < 0.0 and state.speed <= 0.0:
        return 0.0
    return a


def integrate_step(state, accel, dt, max_speed=None):
    """Advance one fixed step with a semi-implicit Euler update.

    Speed is updated first and clamped to ``[0, max_speed]``; position then
    advances with the mean of the old and new speed. The returned state's
    ``accel`` is the acceleration actually realised after clamping.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    v0 = state.speed / KMH_PER_MPS
    v1 = v0 + accel * dt
    realised = accel
    if v1 < 0.0:
        v1 = 0.0
        realised = -v0 / dt
    elif max_speed is not None and v1 > max_speed / KMH_PER_MPS:
        v1 = max_speed / KMH_PER_MPS
        realised = (v1 - v0) / dt
    position = state.position + 0.5 * (v0 + v1) * dt
    return VehicleState(position=position, speed=v1 * KMH_PER_MPS, accel=realised)
