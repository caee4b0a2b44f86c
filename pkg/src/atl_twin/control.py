"""Temperature PID loops and the force-device supervisor.

The PID is positional with derivative-on-measurement, a first-order
derivative filter, and conditional-integration anti-windup. The supervisor
configures and monitors the force device over its Modbus client and turns
device or communication errors into alarms for the sequencer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Tuple

from .modbus.client import CommTimeout, ModbusClient
from .modbus.registers import (
    HOLDING_CONTACT_RAMP,
    HOLDING_ENABLE,
    HOLDING_PAYLOAD,
    HOLDING_TARGET_FORCE,
    INPUT_ACTUAL_FORCE,
    INPUT_CONTACT_STATE,
    INPUT_ERROR_CODE,
    INPUT_STROKE,
    SCALE_FORCE,
    SCALE_PAYLOAD,
    SCALE_RAMP,
    SCALE_STROKE,
)


class InvalidPlant(ValueError):
    """Tuning requested for a plant with non-physical parameters."""


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float


@dataclass(frozen=True)
class PidState:
    gains: PidGains
    u_min: float
    u_max: float
    derivative_alpha: float = 0.9  # filter pole, 0 = unfiltered
    integrator: float = 0.0  # integral of error, K*s
    previous_measurement: Optional[float] = None
    previous_derivative: float = 0.0
    anti_windup: bool = True

    def __post_init__(self):
        if self.u_min >= self.u_max:
            raise ValueError("u_min must be below u_max")
        if not 0.0 <= self.derivative_alpha <= 1.0:
            raise ValueError("derivative filter coefficient must be in [0, 1]")


def pid_step(
    p: PidState, setpoint: float, measurement: float, dt: float
) -> Tuple[float, PidState]:
    """One controller update; returns the clamped command and the new state.

    Derivative acts on the measurement so setpoint steps produce no kick;
    previous_measurement seeds from the first sample (bumpless start).
    The integrator freezes while the output is saturated in the direction
    of the error.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = p.gains
    error = setpoint - measurement
    prev = measurement if p.previous_measurement is None else p.previous_measurement
    d_raw = (measurement - prev) / dt
    d = p.derivative_alpha * p.previous_derivative + (1.0 - p.derivative_alpha) * d_raw

    integrator = p.integrator + error * dt
    if g.ki > 0.0:
        # keep the integral contribution inside the output span
        bound = (p.u_max - p.u_min) / g.ki
        integrator = min(max(integrator, -bound), bound)
    u_raw = g.kp * error + g.ki * integrator - g.kd * d
    u = min(max(u_raw, p.u_min), p.u_max)

    if p.anti_windup and u != u_raw and (u_raw - u) * error > 0:
        integrator = p.integrator  # saturated in the error direction: freeze
    return u, replace(
        p,
        integrator=integrator,
        previous_measurement=measurement,
        previous_derivative=d,
    )


def pid_reset(p: PidState) -> PidState:
    return replace(p, integrator=0.0, previous_measurement=None, previous_derivative=0.0)


def pid_tune_defaults(
    capacity: float, loss: float, efficiency: float, delay: float = 0.0
) -> PidGains:
    """Conservative starting gains from an internal-model-control rule.

    Plant: first order with gain K = efficiency/loss (K/W), time constant
    tau = capacity/loss, plus dead time. Closed-loop constant is picked
    at max(2*delay, tau/10) so the defaults stay docile; operators tune
    from here via the HMI.
    """
    if capacity <= 0 or loss <= 0:
        raise InvalidPlant("capacity and loss must be positive")
    if efficiency <= 0:
        raise InvalidPlant("efficiency must be positive")
    gain = efficiency / loss
    tau = capacity / loss
    tau_c = max(2.0 * delay, tau / 10.0)
    kp = tau / (gain * (tau_c + delay))
    ti = min(tau, 4.0 * (tau_c + delay))
    return PidGains(kp=kp, ki=kp / ti, kd=0.0)


# --------------------------------------------------------------------------
# Force supervisor


class SupervisorPhase(Enum):
    IDLE = "idle"
    CONFIGURED = "configured"
    MONITORING = "monitoring"
    FAULTED = "faulted"


@dataclass(frozen=True)
class AcfReading:
    stroke: float = 0.0  # mm
    contact: bool = False
    error_code: int = 0
    actual_force: float = 0.0  # N


@dataclass(frozen=True)
class ForceSupervisorState:
    desired_force: float  # N
    payload: float  # kg
    contact_ramp: float  # N/s
    phase: SupervisorPhase = SupervisorPhase.IDLE
    last_read: AcfReading = field(default_factory=AcfReading)
    enabled_written: bool = False


def force_supervisor_step(
    f: ForceSupervisorState, client: ModbusClient, enable: bool = False
) -> Tuple[ForceSupervisorState, List[str]]:
    """One supervisor tick over the Modbus client.

    Idle writes the force parameters; afterwards every tick polls the
    monitoring registers and keeps the enable register in sync. A nonzero
    device error or a communication timeout faults the supervisor; no
    writes are issued while faulted.
    """
    alarms: List[str] = []
    if f.phase is SupervisorPhase.FAULTED:
        return f, alarms
    try:
        if f.phase is SupervisorPhase.IDLE:
            client.write_multiple(
                HOLDING_TARGET_FORCE,
                [
                    int(round(f.desired_force / SCALE_FORCE)),
                    int(round(f.payload / SCALE_PAYLOAD)),
                    int(round(f.contact_ramp / SCALE_RAMP)),
                ],
            )
            return replace(f, phase=SupervisorPhase.CONFIGURED), alarms

        if f.enabled_written != enable:
            client.write_single(HOLDING_ENABLE, 1 if enable else 0)
            f = replace(f, enabled_written=enable)

        regs = client.read_input(INPUT_STROKE, 4)
        reading = AcfReading(
            stroke=regs[INPUT_STROKE] * SCALE_STROKE,
            contact=bool(regs[INPUT_CONTACT_STATE]),
            error_code=regs[INPUT_ERROR_CODE],
            actual_force=regs[INPUT_ACTUAL_FORCE] * SCALE_FORCE,
        )
        if reading.error_code != 0:
            alarms.append(f"acf_error:{reading.error_code}")
            return replace(f, last_read=reading, phase=SupervisorPhase.FAULTED), alarms
        return replace(f, last_read=reading, phase=SupervisorPhase.MONITORING), alarms
    except CommTimeout as e:
        alarms.append(f"acf_comm_timeout:{e}")
        return replace(f, phase=SupervisorPhase.FAULTED), alarms


def force_supervisor_reconfigure(
    f: ForceSupervisorState, desired_force: float
) -> ForceSupervisorState:
    """Change the force target; the next Idle pass rewrites the registers."""
    if desired_force <= 0:
        raise ValueError("desired force must be positive")
    return replace(f, desired_force=desired_force, phase=SupervisorPhase.IDLE)


def force_supervisor_reset(f: ForceSupervisorState) -> ForceSupervisorState:
    """Leave Faulted after the operator acknowledged; reconfigures from Idle."""
    return replace(f, phase=SupervisorPhase.IDLE, enabled_written=False)
