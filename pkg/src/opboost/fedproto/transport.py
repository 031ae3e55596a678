"""Byte-stream transports carrying framed messages, with traffic accounting."""

from __future__ import annotations

import queue
import socket
import threading
import time
from collections import defaultdict
from typing import Optional

from ..errors import ProtocolError, TransportError
from .wire import HEADER_SIZE, Hello, MsgType, decode, encode, frame, parse_header


class TrafficLedger:
    """Thread-safe byte counters keyed by direction and protocol phase.

    Counts whole frames (header + payload); TCP/IP framing is not included.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._bytes: dict[tuple[str, str], int] = defaultdict(int)

    def add(self, direction: str, phase: str, nbytes: int) -> None:
        with self._lock:
            self._bytes[(direction, phase)] += nbytes

    def total(self, direction: Optional[str] = None, phase: Optional[str] = None) -> int:
        with self._lock:
            return sum(
                v for (d, p), v in self._bytes.items()
                if (direction is None or d == direction) and (phase is None or p == phase)
            )

    @property
    def bytes_a_to_b(self) -> int:
        return self.total("a_to_b")

    @property
    def bytes_b_to_a(self) -> int:
        return self.total("b_to_a")

    def breakdown(self) -> dict[tuple[str, str], int]:
        with self._lock:
            return dict(self._bytes)


class Channel:
    """One endpoint of an ordered reliable byte stream.

    ``role`` is ``"a"`` or ``"b"``.  Bytes are charged to the ledger on send,
    and also on receive when ``count_received`` is set (a socket endpoint
    whose peer's ledger lives in another process).
    """

    def __init__(self, role: str, ledger: Optional[TrafficLedger] = None, count_received: bool = False):
        if role not in ("a", "b"):
            raise ValueError("role must be 'a' or 'b'")
        self.role = role
        self.other = "b" if role == "a" else "a"
        self.ledger = ledger
        self.count_received = count_received
        self.phase = "phase1"

    # subclasses provide raw byte I/O
    def _write(self, data: bytes) -> None:
        raise NotImplementedError

    def _read_exact(self, n: int) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def send_frame(self, data: bytes) -> None:
        self._write(data)
        if self.ledger is not None:
            self.ledger.add(f"{self.role}_to_{self.other}", self.phase, len(data))

    def send(self, msg) -> None:
        if isinstance(msg, Hello):
            self.phase = f"phase{msg.phase}"
        self.send_frame(encode(msg))

    def send_end(self) -> None:
        self.send_frame(frame(MsgType.END))

    def send_error(self, text: str) -> None:
        self.send_frame(frame(MsgType.ERROR, text.encode()))

    def recv_frame(self) -> tuple[MsgType, bytes]:
        mt, length = parse_header(self._read_exact(HEADER_SIZE))
        payload = self._read_exact(length) if length else b""
        if mt is MsgType.HELLO and len(payload) == 5:
            # a hello opens a session; the phase it names applies from here on
            self.phase = f"phase{payload[4]}"
        if self.ledger is not None and self.count_received:
            self.ledger.add(f"{self.other}_to_{self.role}", self.phase, HEADER_SIZE + length)
        return mt, payload

    def recv(self, expect: Optional[MsgType] = None):
        mt, payload = self.recv_frame()
        msg = decode(mt, payload)
        if expect is not None and mt is not expect:
            raise ProtocolError(f"expected {expect.name}, got {mt.name}")
        return mt, msg

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class LoopbackChannel(Channel):
    """In-process endpoint; create connected pairs with :func:`loopback_pair`."""

    def __init__(self, role, ledger, inbox: "queue.Queue[bytes]", outbox: "queue.Queue[bytes]", timeout: float = 60.0):
        super().__init__(role, ledger)
        self._inbox, self._outbox = inbox, outbox
        self._buf = bytearray()
        self._timeout = timeout

    def _write(self, data: bytes) -> None:
        self._outbox.put(bytes(data))

    def _read_exact(self, n: int) -> bytes:
        while len(self._buf) < n:
            try:
                chunk = self._inbox.get(timeout=self._timeout)
            except queue.Empty:
                raise TransportError("loopback read timed out") from None
            if chunk is None:
                raise TransportError("peer closed")
            self._buf += chunk
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def close(self) -> None:
        self._outbox.put(None)


def loopback_pair(ledger: Optional[TrafficLedger] = None) -> tuple[LoopbackChannel, LoopbackChannel]:
    """Connected ``(party_a_end, party_b_end)``."""
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return LoopbackChannel("a", ledger, b_to_a, a_to_b), LoopbackChannel("b", ledger, a_to_b, b_to_a)


class SocketChannel(Channel):
    def __init__(self, role, ledger, sock: socket.socket):
        super().__init__(role, ledger, count_received=True)
        self.sock = sock

    def _write(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            except OSError as exc:
                raise TransportError(str(exc)) from exc
            if not chunk:
                raise TransportError("connection closed by peer")
            buf += chunk
        return bytes(buf)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def parse_hostport(s: str) -> tuple[str, int]:
    host, _, port = s.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {s!r}")
    return host, int(port)


class TcpListener:
    """Party A's listening socket; each accepted connection becomes a channel."""

    def __init__(self, host: str, port: int, ledger: Optional[TrafficLedger] = None, timeout: float = 120.0):
        self.ledger = ledger
        self.sock = socket.create_server((host, port))
        self.sock.settimeout(timeout)

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()[:2]

    def accept(self) -> SocketChannel:
        try:
            conn, _ = self.sock.accept()
        except OSError as exc:
            raise TransportError(f"accept failed: {exc}") from exc
        conn.settimeout(self.sock.gettimeout())
        return SocketChannel("a", self.ledger, conn)

    def close(self) -> None:
        self.sock.close()


def tcp_connect(host: str, port: int, ledger: Optional[TrafficLedger] = None, wait: float = 60.0) -> SocketChannel:
    """Party B side: connect, retrying until ``wait`` seconds have passed."""
    deadline = time.monotonic() + wait
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=wait)
            return SocketChannel("b", ledger, sock)
        except OSError as exc:
            if time.monotonic() > deadline:
                raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
            time.sleep(0.1)
