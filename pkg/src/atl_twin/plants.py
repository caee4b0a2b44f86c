"""Plant models the control stack acts on.

Heating zones are lumped first-order systems with a moving-tape transport
delay; the force device is ramp-limited force tracking against an elastic
contact; the pneumatics are timed two-position cylinders; tape bookkeeping
enforces freewheel monotonicity and spool conservation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Deque, List, Optional, Tuple


class InterlockViolation(Exception):
    """Feed and blade valves commanded active at the same time."""


class SpoolEmpty(Exception):
    """Requested dispense exceeds the tape remaining on the spool."""


# --------------------------------------------------------------------------
# Thermal zones


@dataclass(frozen=True)
class ThermalParams:
    capacity: float  # J/K
    loss: float  # W/K
    efficiency: float  # unitless, 0..1
    ambient: float  # deg C
    power_max: float  # W
    sensor_distance: float = 0.0  # m of tape between heater and sensor

    def __post_init__(self):
        if self.capacity <= 0 or self.loss <= 0:
            raise ValueError("capacity and loss must be positive")
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError("efficiency must be in (0, 1]")
        if self.power_max <= 0:
            raise ValueError("power_max must be positive")
        if self.sensor_distance < 0:
            raise ValueError("sensor_distance cannot be negative")

    def time_constant(self) -> float:
        return self.capacity / self.loss

    def steady_state(self, power: float) -> float:
        return self.ambient + self.efficiency * power / self.loss


@dataclass(frozen=True)
class ThermalZoneState:
    params: ThermalParams
    temperature: float  # deg C at the measurement point (what the sensor reports)
    heater_power: float = 0.0  # W currently applied
    heater_temperature: float = 0.0  # deg C at the heater point
    # tape elements between heater and sensor, oldest first: (length m, temp C)
    delay_queue: Tuple[Tuple[float, float], ...] = ()

    @staticmethod
    def at_ambient(params: ThermalParams) -> "ThermalZoneState":
        queue = ()
        if params.sensor_distance > 0:
            queue = ((params.sensor_distance, params.ambient),)
        return ThermalZoneState(
            params=params,
            temperature=params.ambient,
            heater_temperature=params.ambient,
            delay_queue=queue,
        )


def thermal_step(
    z: ThermalZoneState, power_cmd: float, feed_speed: float, dt: float
) -> ThermalZoneState:
    """Explicit Euler on C*dT/dt = eta*P - h*(T - T_amb), plus tape transport.

    The reported temperature is the tape element currently at the measurement
    point; with sensor_distance 0 the heater point is measured directly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = z.params
    power = min(max(power_cmd, 0.0), p.power_max)
    t_h = z.heater_temperature + dt * (
        p.efficiency * power - p.loss * (z.heater_temperature - p.ambient)
    ) / p.capacity

    if p.sensor_distance <= 0:
        return replace(z, temperature=t_h, heater_temperature=t_h, heater_power=power)

    queue: Deque[Tuple[float, float]] = deque(z.delay_queue)
    advance = feed_speed * dt
    if advance > 0:
        queue.append((advance, t_h))
        total = sum(seg[0] for seg in queue)
        excess = total - p.sensor_distance
        reported = z.temperature
        while excess > 0 and queue:
            length, temp = queue[0]
            if length <= excess + 1e-15:
                queue.popleft()
                excess -= length
                reported = temp
            else:
                queue[0] = (length - excess, temp)
                reported = temp
                excess = 0.0
    else:
        reported = z.temperature
    return replace(
        z,
        temperature=reported,
        heater_temperature=t_h,
        heater_power=power,
        delay_queue=tuple(queue),
    )


# --------------------------------------------------------------------------
# Force device (ACF)


class AcfError(Enum):
    NONE = 0
    STROKE_LIMIT = 1


@dataclass(frozen=True)
class AcfParams:
    stroke_max: float  # mm
    contact_stiffness: float  # N/mm, elastic roller layer
    approach_speed: float = 50.0  # mm/s free extension speed

    def __post_init__(self):
        if self.stroke_max <= 0 or self.contact_stiffness <= 0 or self.approach_speed <= 0:
            raise ValueError("ACF parameters must be positive")


@dataclass(frozen=True)
class AcfState:
    params: AcfParams
    target_force: float = 0.0  # N
    actual_force: float = 0.0  # N
    payload: float = 0.0  # kg
    contact_ramp: float = 100.0  # N/s
    stroke: float = 0.0  # mm
    contact: bool = False
    error: AcfError = AcfError.NONE
    enabled: bool = False


def acf_step(a: AcfState, mold_gap: float, dt: float) -> AcfState:
    """Advance the force device against a mold at the given gap.

    mold_gap is the distance (mm) from the fully retracted roller tip to the
    mold surface along the compaction axis. A gap beyond the stroke range
    latches STROKE_LIMIT; the error persists until acf_reset.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = a.params
    if a.error is not AcfError.NONE:
        return replace(a, actual_force=0.0, contact=False)

    if not a.enabled:
        if a.contact and a.actual_force > 0.0:
            # disengage: ramp the force down first, contact holds meanwhile
            force = max(0.0, a.actual_force - a.contact_ramp * dt)
            stroke = mold_gap + force / p.contact_stiffness
            return replace(a, actual_force=force, stroke=stroke, contact=force > 0.0)
        stroke = max(0.0, a.stroke - p.approach_speed * dt)
        return replace(a, stroke=stroke, actual_force=0.0, contact=False)

    if mold_gap < 0:
        # mold pushed past the retracted tip: stroke would need to go negative
        return replace(a, error=AcfError.STROKE_LIMIT, actual_force=0.0, contact=False)

    if not a.contact:
        stroke = a.stroke + p.approach_speed * dt
        if stroke >= mold_gap:
            return replace(a, stroke=mold_gap, contact=True)
        if stroke >= p.stroke_max:
            return replace(
                a, stroke=p.stroke_max, error=AcfError.STROKE_LIMIT, actual_force=0.0
            )
        return replace(a, stroke=stroke)

    # in contact: ramp-limited tracking of the force target
    step = a.contact_ramp * dt
    force = a.actual_force + min(max(a.target_force - a.actual_force, -step), step)
    stroke = mold_gap + force / p.contact_stiffness
    if stroke > p.stroke_max or stroke < 0.0:
        return replace(a, error=AcfError.STROKE_LIMIT, actual_force=0.0, contact=False)
    return replace(a, actual_force=force, stroke=stroke)


def acf_reset(a: AcfState) -> AcfState:
    """Acknowledge errors and retract: clean state with stroke at zero."""
    return replace(
        a, error=AcfError.NONE, actual_force=0.0, stroke=0.0, contact=False, enabled=False
    )


# --------------------------------------------------------------------------
# Pneumatics: feed cylinder and cutting blade


class FeedPhase(Enum):
    REAR = "rear"
    MOVING_FORWARD = "moving_forward"
    FRONT = "front"
    MOVING_BACKWARD = "moving_backward"


class BladePhase(Enum):
    RETRACTED = "retracted"
    EXTENDING = "extending"
    EXTENDED = "extended"
    RETRACTING = "retracting"


@dataclass(frozen=True)
class PneumaticParams:
    feed_travel_time: float  # s, rear to front
    blade_travel_time: float  # s, retracted to extended (spring return same)
    feed_stroke_length: float  # m of tape dispensed per full forward stroke

    def __post_init__(self):
        if min(self.feed_travel_time, self.blade_travel_time, self.feed_stroke_length) <= 0:
            raise ValueError("pneumatic parameters must be positive")


@dataclass(frozen=True)
class PneumaticState:
    params: PneumaticParams
    feed_position: float = 0.0  # 0 = rear, 1 = front
    blade_position: float = 0.0  # 0 = retracted, 1 = extended
    feed_valve: bool = False
    blade_valve: bool = False

    @property
    def feed_phase(self) -> FeedPhase:
        if self.feed_position <= 0.0:
            return FeedPhase.REAR
        if self.feed_position >= 1.0:
            return FeedPhase.FRONT
        return FeedPhase.MOVING_FORWARD if self.feed_valve else FeedPhase.MOVING_BACKWARD

    @property
    def blade_phase(self) -> BladePhase:
        if self.blade_position <= 0.0:
            return BladePhase.RETRACTED
        if self.blade_position >= 1.0:
            return BladePhase.EXTENDED
        return BladePhase.EXTENDING if self.blade_valve else BladePhase.RETRACTING

    @property
    def auto_switch_rear(self) -> bool:
        return self.feed_phase is FeedPhase.REAR

    @property
    def auto_switch_front(self) -> bool:
        return self.feed_phase is FeedPhase.FRONT


def pneumatic_step(
    p: PneumaticState, feed_valve: bool, blade_valve: bool, dt: float
) -> Tuple[PneumaticState, float]:
    """Advance cylinder phases; returns the new state and tape advanced (m).

    Tape advances only while the feed cylinder moves forward (freewheel);
    the return stroke dispenses nothing.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if feed_valve and blade_valve:
        raise InterlockViolation("feed and blade valves commanded simultaneously")
    prm = p.params
    rate = dt / prm.feed_travel_time
    if feed_valve:
        feed_pos = min(1.0, p.feed_position + rate)
        advance = (feed_pos - p.feed_position) * prm.feed_stroke_length
    else:
        feed_pos = max(0.0, p.feed_position - rate)
        advance = 0.0
    brate = dt / prm.blade_travel_time
    if blade_valve:
        blade_pos = min(1.0, p.blade_position + brate)
    else:
        blade_pos = max(0.0, p.blade_position - brate)
    new = replace(
        p,
        feed_position=feed_pos,
        blade_position=blade_pos,
        feed_valve=feed_valve,
        blade_valve=blade_valve,
    )
    return new, advance


# --------------------------------------------------------------------------
# Tape bookkeeping


@dataclass(frozen=True)
class TapeState:
    spool_remaining: float  # m left on the spool
    fed_length: float = 0.0  # cumulative tape advanced past the nip point
    tip_offset: float = 0.0  # signed distance of tape tip ahead of the nip point
    tail_remaining: Optional[float] = None  # m of cut tail still to lay, None = uncut
    laid_segments: Tuple[Tuple[int, float, float], ...] = ()

    @property
    def cut(self) -> bool:
        return self.tail_remaining is not None


def tape_step(
    t: TapeState,
    advance: float,
    taping_speed: float,
    dt: float,
    cutting: bool,
    cutter_to_nip_distance: float,
) -> TapeState:
    """Advance tape bookkeeping for one step.

    advance is tape pushed by the feed cylinder; taping_speed pulls tape
    through the nip while consolidating. A cut detaches the tape from the
    spool, leaving exactly cutter_to_nip_distance of tail to lay down.
    """
    if advance < 0:
        raise ValueError("advance cannot be negative")
    lay = max(taping_speed, 0.0) * dt
    fed = t.fed_length
    spool = t.spool_remaining
    tip = t.tip_offset
    tail = t.tail_remaining

    if tail is None:
        # still attached to the spool: everything pulled comes off the spool
        dispense = advance + lay
        if dispense > spool + 1e-12:
            raise SpoolEmpty(
                f"need {dispense:.4f} m but only {spool:.4f} m left on spool"
            )
        spool -= dispense
        fed += dispense
        tip += advance
        if cutting:
            tail = cutter_to_nip_distance
    else:
        # detached tail: lay-down continues without unspooling
        laid = min(lay, tail)
        fed += laid
        tail -= laid
    return replace(
        t,
        spool_remaining=spool,
        fed_length=fed,
        tip_offset=tip,
        tail_remaining=tail,
    )


def tape_mark_laid(t: TapeState, track_index: int, s_start: float, s_end: float) -> TapeState:
    segs = t.laid_segments + ((track_index, s_start, s_end),)
    return replace(t, laid_segments=segs)


def tape_new_track(t: TapeState) -> TapeState:
    """Reset per-track tip state after a cut tail finished laying."""
    return replace(t, tail_remaining=None, tip_offset=0.0)
