"""Register map of the emulated force device.

Addresses and integer scalings are a convention of this cell and are shared
by client and server through the constants below, keeping both in lockstep.

Holding registers (read/write):
    0  target force     0.1 N / count
    1  payload          0.01 kg / count
    2  contact ramp     0.1 N/s / count
    3  enable           0 or 1
    4  error ack        write 1 to acknowledge and retract

Input registers (read only):
    0  actual stroke    0.1 mm / count
    1  contact state    0 or 1
    2  error code       0 none, 1 stroke limit
    3  actual force     0.1 N / count
"""

from __future__ import annotations

import dataclasses
import threading
from typing import Tuple

from ..plants import AcfState, acf_reset, acf_step
from .codec import (
    EX_ILLEGAL_DATA_ADDRESS,
    EX_ILLEGAL_DATA_VALUE,
    FC_READ_HOLDING,
    FC_READ_INPUT,
    ExceptionResponse,
    ReadRequest,
    ReadResponse,
    Request,
    Response,
    WriteMultipleRequest,
    WriteMultipleResponse,
    WriteSingleRequest,
    WriteSingleResponse,
)

HOLDING_TARGET_FORCE = 0
HOLDING_PAYLOAD = 1
HOLDING_CONTACT_RAMP = 2
HOLDING_ENABLE = 3
HOLDING_ERROR_ACK = 4
HOLDING_COUNT = 5

INPUT_STROKE = 0
INPUT_CONTACT_STATE = 1
INPUT_ERROR_CODE = 2
INPUT_ACTUAL_FORCE = 3
INPUT_COUNT = 4

SCALE_FORCE = 0.1  # N per count
SCALE_PAYLOAD = 0.01  # kg per count
SCALE_RAMP = 0.1  # N/s per count
SCALE_STROKE = 0.1  # mm per count


def _clamp_u16(value: float) -> int:
    return min(max(int(round(value)), 0), 0xFFFF)


class AcfRegisterBank:
    """Single guarded owner of the AcfState and its register image.

    The simulation loop steps the plant through step_plant(); wire requests
    mutate or read the same state under the lock, so every read sees a
    consistent snapshot of the last completed step.
    """

    def __init__(self, state: AcfState):
        self._lock = threading.Lock()
        self._state = state

    @property
    def state(self) -> AcfState:
        with self._lock:
            return self._state

    def step_plant(self, mold_gap: float, dt: float) -> AcfState:
        with self._lock:
            self._state = acf_step(self._state, mold_gap, dt)
            return self._state

    def set_enabled(self, enabled: bool) -> None:
        with self._lock:
            self._state = dataclasses.replace(self._state, enabled=enabled)

    def _read_holding(self, addr: int) -> int:
        s = self._state
        return {
            HOLDING_TARGET_FORCE: _clamp_u16(s.target_force / SCALE_FORCE),
            HOLDING_PAYLOAD: _clamp_u16(s.payload / SCALE_PAYLOAD),
            HOLDING_CONTACT_RAMP: _clamp_u16(s.contact_ramp / SCALE_RAMP),
            HOLDING_ENABLE: 1 if s.enabled else 0,
            HOLDING_ERROR_ACK: 0,
        }[addr]

    def _read_input(self, addr: int) -> int:
        s = self._state
        return {
            INPUT_STROKE: _clamp_u16(s.stroke / SCALE_STROKE),
            INPUT_CONTACT_STATE: 1 if s.contact else 0,
            INPUT_ERROR_CODE: s.error.value,
            INPUT_ACTUAL_FORCE: _clamp_u16(s.actual_force / SCALE_FORCE),
        }[addr]

    def _write_holding(self, addr: int, value: int) -> None:
        s = self._state
        if addr == HOLDING_TARGET_FORCE:
            s = dataclasses.replace(s, target_force=value * SCALE_FORCE)
        elif addr == HOLDING_PAYLOAD:
            s = dataclasses.replace(s, payload=value * SCALE_PAYLOAD)
        elif addr == HOLDING_CONTACT_RAMP:
            s = dataclasses.replace(s, contact_ramp=value * SCALE_RAMP)
        elif addr == HOLDING_ENABLE:
            s = dataclasses.replace(s, enabled=bool(value))
        elif addr == HOLDING_ERROR_ACK:
            if value:
                s = acf_reset(s)
        self._state = s

    def process(self, req: Request) -> Response:
        """Serve one decoded request against the live register image."""
        with self._lock:
            if isinstance(req, ReadRequest):
                if req.function == FC_READ_HOLDING:
                    limit, read = HOLDING_COUNT, self._read_holding
                else:
                    limit, read = INPUT_COUNT, self._read_input
                if req.address + req.quantity > limit:
                    return ExceptionResponse(
                        req.transaction_id, req.unit_id, req.function, EX_ILLEGAL_DATA_ADDRESS
                    )
                regs = tuple(read(req.address + i) for i in range(req.quantity))
                return ReadResponse(req.transaction_id, req.unit_id, req.function, regs)
            if isinstance(req, WriteSingleRequest):
                if req.address >= HOLDING_COUNT:
                    return ExceptionResponse(
                        req.transaction_id, req.unit_id, req.function, EX_ILLEGAL_DATA_ADDRESS
                    )
                if req.address == HOLDING_ENABLE and req.value not in (0, 1):
                    return ExceptionResponse(
                        req.transaction_id, req.unit_id, req.function, EX_ILLEGAL_DATA_VALUE
                    )
                self._write_holding(req.address, req.value)
                return WriteSingleResponse(
                    req.transaction_id, req.unit_id, req.address, req.value
                )
            if isinstance(req, WriteMultipleRequest):
                if req.address + len(req.values) > HOLDING_COUNT:
                    return ExceptionResponse(
                        req.transaction_id, req.unit_id, req.function, EX_ILLEGAL_DATA_ADDRESS
                    )
                for i, v in enumerate(req.values):
                    self._write_holding(req.address + i, v)
                return WriteMultipleResponse(
                    req.transaction_id, req.unit_id, req.address, len(req.values)
                )
            return ExceptionResponse(
                req.transaction_id, req.unit_id, getattr(req, "function", 0), EX_ILLEGAL_DATA_VALUE
            )

    def snapshot_inputs(self) -> Tuple[int, ...]:
        with self._lock:
            return tuple(self._read_input(i) for i in range(INPUT_COUNT))
