"""Blocking Modbus TCP client used by the force supervisor."""

from __future__ import annotations

import socket
from typing import Optional, Sequence, Tuple

from .codec import (
    FC_READ_HOLDING,
    FC_READ_INPUT,
    ExceptionResponse,
    MalformedFrame,
    ModbusError,
    ReadRequest,
    ReadResponse,
    Response,
    WriteMultipleRequest,
    WriteSingleRequest,
    decode_response,
    encode_request,
    extract_frame,
)


class CommTimeout(ModbusError):
    """No reply from the device within the configured timeout."""


class ModbusExceptionReply(ModbusError):
    def __init__(self, function: int, code: int):
        super().__init__(f"exception 0x{code:02x} for function 0x{function:02x}")
        self.function = function
        self.code = code


class ModbusClient:
    def __init__(self, host: str, port: int, timeout: float = 0.5, unit_id: int = 1):
        self.host = host
        self.port = port
        self.timeout = timeout
        self.unit_id = unit_id
        self._sock: Optional[socket.socket] = None
        self._tid = 0
        self._buffer = b""

    def connect(self) -> "ModbusClient":
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.settimeout(self.timeout)
        try:
            sock.connect((self.host, self.port))
        except (OSError, socket.timeout) as e:
            sock.close()
            raise CommTimeout(f"connect to {self.host}:{self.port} failed: {e}") from e
        self._sock = sock
        return self

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None
        self._buffer = b""

    def __enter__(self) -> "ModbusClient":
        return self.connect()

    def __exit__(self, *exc) -> None:
        self.close()

    def _roundtrip(self, req) -> Response:
        if self._sock is None:
            self.connect()
        # snapshot the socket: close() may null it out from another thread
        sock = self._sock
        if sock is None:
            raise CommTimeout("client closed")
        frame = encode_request(req)
        try:
            sock.sendall(frame)
            while True:
                got = extract_frame(self._buffer)
                if got is not None:
                    tid, unit, pdu, self._buffer = got
                    from .codec import MBAP

                    resp = decode_response(MBAP.pack(tid, 0, len(pdu) + 1, unit) + pdu)
                    if resp.transaction_id != req.transaction_id:
                        continue  # stale reply from a previous timeout
                    return resp
                chunk = sock.recv(4096)
                if not chunk:
                    raise CommTimeout("connection closed by server")
                self._buffer += chunk
        except socket.timeout as e:
            self.close()
            raise CommTimeout(f"no reply within {self.timeout} s") from e
        except OSError as e:
            self.close()
            raise CommTimeout(f"socket error: {e}") from e

    def _next_tid(self) -> int:
        self._tid = (self._tid + 1) & 0xFFFF
        return self._tid

    def _expect(self, resp: Response):
        if isinstance(resp, ExceptionResponse):
            raise ModbusExceptionReply(resp.function, resp.exception_code)
        return resp

    def read_holding(self, address: int, quantity: int = 1) -> Tuple[int, ...]:
        req = ReadRequest(self._next_tid(), self.unit_id, FC_READ_HOLDING, address, quantity)
        return self._expect(self._roundtrip(req)).registers

    def read_input(self, address: int, quantity: int = 1) -> Tuple[int, ...]:
        req = ReadRequest(self._next_tid(), self.unit_id, FC_READ_INPUT, address, quantity)
        return self._expect(self._roundtrip(req)).registers

    def write_single(self, address: int, value: int) -> None:
        req = WriteSingleRequest(self._next_tid(), self.unit_id, address, value)
        self._expect(self._roundtrip(req))

    def write_multiple(self, address: int, values: Sequence[int]) -> None:
        req = WriteMultipleRequest(self._next_tid(), self.unit_id, address, tuple(values))
        self._expect(self._roundtrip(req))
