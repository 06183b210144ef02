"""Event label stream for external log consumers (file and TCP sinks)."""

from __future__ import annotations

import enum
import io
import logging
import socket
from dataclasses import dataclass

log = logging.getLogger(__name__)

DEFAULT_PORT = 9000


class SinkError(RuntimeError):
    pass


class EventKind(enum.Enum):
    PU_OFF_ON = "PU Off to On"
    PU_ON_OFF = "PU On to Off"
    SWITCHING = "Switching"
    SU_USING = "SU Using"
    SU_PREEMPTED = "SU Preempted"


ARITY = {
    EventKind.PU_OFF_ON: 2,  # su_id, channel_id
    EventKind.PU_ON_OFF: 1,  # channel_id
    EventKind.SWITCHING: 1,  # switching delay in us
    EventKind.SU_USING: 2,  # su_id, duration in us
    EventKind.SU_PREEMPTED: 2,  # su_id, channel_id
}
_BY_LABEL = {k.value: k for k in EventKind}


@dataclass(frozen=True)
class EventRecord:
    sim_time: int
    kind: EventKind
    args: tuple[int, ...]

    def __post_init__(self):
        if len(self.args) != ARITY[self.kind]:
            raise ValueError(f"{self.kind.value} takes {ARITY[self.kind]} args, got {self.args}")


def format_event(record: EventRecord, timestamp_prefix: bool = False) -> str:
    """``Label,arg,arg\\n``; optionally prefixed ``<sim_time_us>|``."""
    body = ",".join([record.kind.value, *(str(int(a)) for a in record.args)])
    if timestamp_prefix:
        return f"{record.sim_time}|{body}\n"
    return body + "\n"


def parse_event(line: str) -> EventRecord:
    """Inverse of :func:`format_event`; a missing prefix yields ``sim_time=-1``."""
    line = line.rstrip("\n")
    sim_time = -1
    if "|" in line:
        ts, line = line.split("|", 1)
        sim_time = int(ts)
    label, *args = line.split(",")
    return EventRecord(sim_time, _BY_LABEL[label], tuple(int(a) for a in args))


class FileSink:
    def __init__(self, path):
        self.path = path
        self._fh = open(path, "wb")

    def write(self, data: bytes) -> None:
        self._fh.write(data)

    def close(self) -> None:
        self._fh.close()


class BufferSink:
    """In-memory sink, handy for tests and golden-log comparisons."""

    def __init__(self):
        self.buffer = io.BytesIO()

    def write(self, data: bytes) -> None:
        self.buffer.write(data)

    def getvalue(self) -> bytes:
        return self.buffer.getvalue()

    def close(self) -> None:
        pass


class TcpSink:
    """Line stream to a single TCP client that the simulator accepts.

    Writes block until the kernel accepts them, so a slow client applies
    backpressure instead of reordering. After a client disconnect writes are
    dropped silently and the run carries on.
    """

    def __init__(self, port: int = DEFAULT_PORT, host: str = "127.0.0.1"):
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._server.bind((host, port))
            self._server.listen(1)
        except OSError as exc:
            self._server.close()
            raise SinkError(f"cannot listen on {host}:{port}: {exc}") from exc
        self.address = self._server.getsockname()
        self._conn: socket.socket | None = None
        self.connected = False

    @property
    def port(self) -> int:
        return self.address[1]

    def accept(self, timeout: float | None = None) -> bool:
        self._server.settimeout(timeout)
        try:
            conn, peer = self._server.accept()
        except socket.timeout:
            return False
        log.info("event client connected from %s:%s", *peer[:2])
        self._conn = conn
        self.connected = True
        return True

    def write(self, data: bytes) -> None:
        if not self.connected:
            return
        try:
            self._conn.sendall(data)
        except OSError as exc:
            log.warning("event client dropped (%s); continuing without TCP output", exc)
            self.connected = False

    def close(self) -> None:
        if self._conn is not None:
            try:
                self._conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._conn.close()
            self._conn = None
        self.connected = False
        self._server.close()


class EventLog:
    """Fans each record out to every attached sink, in emission order."""

    def __init__(self, sinks=(), timestamp_prefix: bool = False):
        self.sinks = list(sinks)
        self.timestamp_prefix = timestamp_prefix
        self.count = 0
        self._last_time = -1

    def attach(self, sink) -> None:
        self.sinks.append(sink)

    @property
    def ready(self) -> bool:
        """True once any TCP sink has a client, or when there is no TCP sink."""
        tcp = [s for s in self.sinks if isinstance(s, TcpSink)]
        return not tcp or any(s.connected for s in tcp)

    def emit(self, record: EventRecord) -> None:
        if record.sim_time < self._last_time:
            raise ValueError(f"event at {record.sim_time} after one at {self._last_time}")
        self._last_time = record.sim_time
        data = format_event(record, self.timestamp_prefix).encode("ascii")
        for sink in self.sinks:
            sink.write(data)
        self.count += 1

    def poll(self) -> None:
        """Pick up a client already waiting on a TCP listener, without blocking."""
        for sink in self.sinks:
            if isinstance(sink, TcpSink) and not sink.connected:
                sink.accept(0.0)

    def reset_clock(self) -> None:
        """Allow the next run's timestamps to restart from zero."""
        self._last_time = -1

    def close(self) -> None:
        for sink in self.sinks:
            sink.close()


def attach_and_gate(
    path=None,
    port: int | None = None,
    gate: bool = False,
    host: str = "127.0.0.1",
    accept_timeout: float | None = None,
    timestamp_prefix: bool = False,
) -> EventLog:
    """Open the configured sinks; with ``gate`` block until a client connects.

    Raises :class:`SinkError` when the port cannot be bound or the gate times
    out. Without ``gate`` a TCP listener is opened but not waited on; a client
    that is already queued gets picked up by :meth:`EventLog.poll`.
    """
    if gate and port is None:
        port = DEFAULT_PORT
    events = EventLog(timestamp_prefix=timestamp_prefix)
    if path is not None:
        events.attach(FileSink(path))
    if port is not None:
        tcp = TcpSink(port, host)
        events.attach(tcp)
        if gate and not tcp.accept(accept_timeout):
            events.close()
            raise SinkError(f"no client connected on port {tcp.port} within {accept_timeout}s")
    return events
