"""Byte-exact Modbus TCP codec for the subset this cell needs.

Supported functions: 0x03 read holding, 0x04 read input, 0x06 write single,
0x10 write multiple. All fields big-endian; MBAP length = PDU bytes + 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

FC_READ_HOLDING = 0x03
FC_READ_INPUT = 0x04
FC_WRITE_SINGLE = 0x06
FC_WRITE_MULTIPLE = 0x10

SUPPORTED_FUNCTIONS = (FC_READ_HOLDING, FC_READ_INPUT, FC_WRITE_SINGLE, FC_WRITE_MULTIPLE)

EX_ILLEGAL_FUNCTION = 0x01
EX_ILLEGAL_DATA_ADDRESS = 0x02
EX_ILLEGAL_DATA_VALUE = 0x03

MBAP = struct.Struct(">HHHB")


class ModbusError(Exception):
    pass


class MalformedFrame(ModbusError):
    pass


class ProtocolIdNonzero(MalformedFrame):
    pass


class InvalidQuantity(ModbusError):
    pass


class UnsupportedFunction(ModbusError):
    pass


@dataclass(frozen=True)
class ReadRequest:
    transaction_id: int
    unit_id: int
    function: int  # 0x03 or 0x04
    address: int
    quantity: int


@dataclass(frozen=True)
class WriteSingleRequest:
    transaction_id: int
    unit_id: int
    address: int
    value: int
    function: int = FC_WRITE_SINGLE


@dataclass(frozen=True)
class WriteMultipleRequest:
    transaction_id: int
    unit_id: int
    address: int
    values: Tuple[int, ...]
    function: int = FC_WRITE_MULTIPLE


@dataclass(frozen=True)
class ReadResponse:
    transaction_id: int
    unit_id: int
    function: int
    registers: Tuple[int, ...]


@dataclass(frozen=True)
class WriteSingleResponse:
    transaction_id: int
    unit_id: int
    address: int
    value: int
    function: int = FC_WRITE_SINGLE


@dataclass(frozen=True)
class WriteMultipleResponse:
    transaction_id: int
    unit_id: int
    address: int
    quantity: int
    function: int = FC_WRITE_MULTIPLE


@dataclass(frozen=True)
class ExceptionResponse:
    transaction_id: int
    unit_id: int
    function: int  # original function code, without the 0x80 flag
    exception_code: int


Request = Union[ReadRequest, WriteSingleRequest, WriteMultipleRequest]
Response = Union[ReadResponse, WriteSingleResponse, WriteMultipleResponse, ExceptionResponse]


def _mbap(transaction_id: int, unit_id: int, pdu: bytes) -> bytes:
    return MBAP.pack(transaction_id, 0, len(pdu) + 1, unit_id) + pdu


def _check_u16(value: int, what: str) -> None:
    if not 0 <= value <= 0xFFFF:
        raise ModbusError(f"{what} out of u16 range: {value}")


def encode_request(req: Request) -> bytes:
    if isinstance(req, ReadRequest):
        if req.function not in (FC_READ_HOLDING, FC_READ_INPUT):
            raise UnsupportedFunction(f"function 0x{req.function:02x}")
        if not 1 <= req.quantity <= 125:
            raise InvalidQuantity(f"quantity {req.quantity} outside [1, 125]")
        _check_u16(req.address, "address")
        pdu = struct.pack(">BHH", req.function, req.address, req.quantity)
    elif isinstance(req, WriteSingleRequest):
        _check_u16(req.address, "address")
        _check_u16(req.value, "value")
        pdu = struct.pack(">BHH", FC_WRITE_SINGLE, req.address, req.value)
    elif isinstance(req, WriteMultipleRequest):
        if not 1 <= len(req.values) <= 123:
            raise InvalidQuantity(f"write quantity {len(req.values)} outside [1, 123]")
        _check_u16(req.address, "address")
        for v in req.values:
            _check_u16(v, "value")
        pdu = struct.pack(
            ">BHHB", FC_WRITE_MULTIPLE, req.address, len(req.values), 2 * len(req.values)
        ) + struct.pack(f">{len(req.values)}H", *req.values)
    else:
        raise UnsupportedFunction(f"unsupported request type {type(req).__name__}")
    return _mbap(req.transaction_id, req.unit_id, pdu)


def encode_response(resp: Response) -> bytes:
    if isinstance(resp, ReadResponse):
        pdu = struct.pack(">BB", resp.function, 2 * len(resp.registers)) + struct.pack(
            f">{len(resp.registers)}H", *resp.registers
        )
    elif isinstance(resp, WriteSingleResponse):
        pdu = struct.pack(">BHH", FC_WRITE_SINGLE, resp.address, resp.value)
    elif isinstance(resp, WriteMultipleResponse):
        pdu = struct.pack(">BHH", FC_WRITE_MULTIPLE, resp.address, resp.quantity)
    elif isinstance(resp, ExceptionResponse):
        pdu = struct.pack(">BB", resp.function | 0x80, resp.exception_code)
    else:
        raise UnsupportedFunction(f"unsupported response type {type(resp).__name__}")
    return _mbap(resp.transaction_id, resp.unit_id, pdu)


def extract_frame(buffer: bytes) -> Optional[Tuple[int, int, bytes, bytes]]:
    """Pull one complete frame off a byte stream.

    Returns (transaction_id, unit_id, pdu, remainder) or None when the
    buffer does not yet hold a complete frame.
    """
    if len(buffer) < MBAP.size:
        return None
    tid, proto, length, unit = MBAP.unpack_from(buffer)
    if proto != 0:
        raise ProtocolIdNonzero(f"protocol id {proto}, expected 0")
    if length < 2 or length > 254:
        raise MalformedFrame(f"implausible MBAP length {length}")
    total = MBAP.size + length - 1
    if len(buffer) < total:
        return None
    pdu = buffer[MBAP.size : total]
    return tid, unit, pdu, buffer[total:]


def _decode_frame(data: bytes) -> Tuple[int, int, bytes]:
    got = extract_frame(data)
    if got is None:
        raise MalformedFrame("truncated frame")
    tid, unit, pdu, rest = got
    if rest:
        raise MalformedFrame(f"{len(rest)} trailing bytes after frame")
    return tid, unit, pdu


def decode_request(data: bytes) -> Request:
    tid, unit, pdu = _decode_frame(data)
    fc = pdu[0]
    if fc in (FC_READ_HOLDING, FC_READ_INPUT):
        if len(pdu) != 5:
            raise MalformedFrame(f"read request PDU length {len(pdu)}, expected 5")
        addr, qty = struct.unpack(">HH", pdu[1:])
        if not 1 <= qty <= 125:
            raise InvalidQuantity(f"quantity {qty} outside [1, 125]")
        return ReadRequest(tid, unit, fc, addr, qty)
    if fc == FC_WRITE_SINGLE:
        if len(pdu) != 5:
            raise MalformedFrame(f"write single PDU length {len(pdu)}, expected 5")
        addr, value = struct.unpack(">HH", pdu[1:])
        return WriteSingleRequest(tid, unit, addr, value)
    if fc == FC_WRITE_MULTIPLE:
        if len(pdu) < 6:
            raise MalformedFrame("write multiple PDU too short")
        addr, qty, bytecount = struct.unpack(">HHB", pdu[1:6])
        if not 1 <= qty <= 123:
            raise InvalidQuantity(f"write quantity {qty} outside [1, 123]")
        if bytecount != 2 * qty or len(pdu) != 6 + bytecount:
            raise MalformedFrame("write multiple byte count mismatch")
        values = struct.unpack(f">{qty}H", pdu[6:])
        return WriteMultipleRequest(tid, unit, addr, values)
    raise UnsupportedFunction(f"function 0x{fc:02x}")


def decode_response(data: bytes) -> Response:
    tid, unit, pdu = _decode_frame(data)
    fc = pdu[0]
    if fc & 0x80:
        if len(pdu) != 2:
            raise MalformedFrame("exception response PDU must be 2 bytes")
        return ExceptionResponse(tid, unit, fc & 0x7F, pdu[1])
    if fc in (FC_READ_HOLDING, FC_READ_INPUT):
        if len(pdu) < 2:
            raise MalformedFrame("read response too short")
        bytecount = pdu[1]
        if bytecount % 2 != 0 or len(pdu) != 2 + bytecount:
            raise MalformedFrame("read response byte count mismatch")
        registers = struct.unpack(f">{bytecount // 2}H", pdu[2:])
        return ReadResponse(tid, unit, fc, registers)
    if fc == FC_WRITE_SINGLE:
        if len(pdu) != 5:
            raise MalformedFrame("write single response PDU length mismatch")
        addr, value = struct.unpack(">HH", pdu[1:])
        return WriteSingleResponse(tid, unit, addr, value)
    if fc == FC_WRITE_MULTIPLE:
        if len(pdu) != 5:
            raise MalformedFrame("write multiple response PDU length mismatch")
        addr, qty = struct.unpack(">HH", pdu[1:])
        return WriteMultipleResponse(tid, unit, addr, qty)
    raise UnsupportedFunction(f"function 0x{fc:02x}")
