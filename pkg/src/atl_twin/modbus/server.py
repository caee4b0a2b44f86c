"""TCP server exposing the emulated force device register bank.

One handler thread per connection; requests on a connection are answered in
order. Connection-level errors drop the connection, the server stays up.
"""

from __future__ import annotations

import logging
import socket
import threading

from .codec import (
    MalformedFrame,
    ModbusError,
    decode_request,
    encode_response,
    extract_frame,
)
from .registers import AcfRegisterBank

log = logging.getLogger(__name__)


class AcfServer:
    """Modbus TCP endpoint serving an AcfRegisterBank."""

    def __init__(self, bank: AcfRegisterBank, host: str = "127.0.0.1", port: int = 1502):
        self.bank = bank
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(4)
        self.host, self.port = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._conns: list = []

    def start(self) -> "AcfServer":
        if not self._thread.is_alive() and not self._stop.is_set():
            try:
                self._thread.start()
            except RuntimeError:
                pass  # already ran: start is idempotent
        return self

    def stop(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        for conn in list(self._conns):
            try:
                conn.close()
            except OSError:
                pass
        self._thread.join(timeout=2.0)

    def __enter__(self) -> "AcfServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, peer = self._sock.accept()
            except OSError:
                return
            self._conns.append(conn)
            threading.Thread(target=self._serve_conn, args=(conn, peer), daemon=True).start()

    def _serve_conn(self, conn: socket.socket, peer) -> None:
        buffer = b""
        try:
            while not self._stop.is_set():
                try:
                    got = extract_frame(buffer)
                except MalformedFrame as e:
                    log.warning("dropping %s: %s", peer, e)
                    return
                if got is None:
                    chunk = conn.recv(4096)
                    if not chunk:
                        return
                    buffer += chunk
                    continue
                tid, unit, pdu, buffer = got
                frame = encode_response(self._handle(tid, unit, pdu))
                conn.sendall(frame)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
            if conn in self._conns:
                self._conns.remove(conn)

    def _handle(self, tid: int, unit: int, pdu: bytes):
        from .codec import MBAP, EX_ILLEGAL_FUNCTION, ExceptionResponse, UnsupportedFunction

        raw = MBAP.pack(tid, 0, len(pdu) + 1, unit) + pdu
        try:
            req = decode_request(raw)
        except UnsupportedFunction:
            fc = pdu[0] if pdu else 0
            return ExceptionResponse(tid, unit, fc, EX_ILLEGAL_FUNCTION)
        except ModbusError:
            from .codec import EX_ILLEGAL_DATA_VALUE

            fc = pdu[0] if pdu else 0
            return ExceptionResponse(tid, unit, fc & 0x7F, EX_ILLEGAL_DATA_VALUE)
        return self.bank.process(req)
