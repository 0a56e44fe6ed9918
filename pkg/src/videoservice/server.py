"""TCP fan-out servers for the two streams.

One broadcaster per stream keeps a bounded queue per client so a
stalled reader never blocks the pipeline: MPJPEG clients drop their
oldest queued part (viewers tolerate missing frames), H.264 clients
are disconnected on overflow because dropping arbitrary NAL bytes
would corrupt the elementary stream.  New H.264 clients wait for a
keyframe and receive the parameter sets first.
"""

import logging
import socket
import threading
import time
from dataclasses import dataclass

from .errors import StartupError

log = logging.getLogger(__name__)

KIND_H264 = "h264"
KIND_MPJPEG = "mpjpeg"

MPJPEG_QUEUE_PARTS = 2
H264_QUEUE_BYTES = 8 * 1024 * 1024
MAX_CLIENTS = 32

# inbound bytes (the browser's GET) are read up to this cap or the first
# blank line, with a short timeout so raw TCP probes that send nothing
# still get the stream
_REQUEST_CAP = 2048
_REQUEST_TIMEOUT = 1.0

AWAITING_KEYFRAME = "awaiting-keyframe"
STREAMING = "streaming"
CLOSING = "closing"


@dataclass(frozen=True)
class SessionStats:
    id: int
    connected_at: float
    state: str
    bytes_sent: int
    frames_dropped: int
    queue_depth: int


class ClientSession:
    """One connected consumer with a bounded chunk queue."""

    _next_id = 1
    _id_lock = threading.Lock()

    def __init__(self, sock, kind):
        with ClientSession._id_lock:
            self.id = ClientSession._next_id
            ClientSession._next_id += 1
        self.sock = sock
        self.kind = kind
        self.connected_at = time.time()
        self.state = AWAITING_KEYFRAME if kind == KIND_H264 else STREAMING
        self.bytes_sent = 0
        self.frames_dropped = 0
        self.queue = []
        self.queued_bytes = 0
        self.cond = threading.Condition()

    def close(self):
        with self.cond:
            self.state = CLOSING
            self.queue.clear()
            self.queued_bytes = 0
            self.cond.notify_all()
        try:
            self.sock.close()
        except OSError:
            pass


class Broadcaster:
    """Fans framed stream units out to every attached session.

    ``broadcast`` only appends to per-client queues and never touches a
    socket, so it cannot block the pipeline.
    """

    def __init__(self, kind, *, mpjpeg_queue_parts=MPJPEG_QUEUE_PARTS,
                 h264_queue_bytes=H264_QUEUE_BYTES, header_chunk=b""):
        self.kind = kind
        self.mpjpeg_queue_parts = mpjpeg_queue_parts
        self.h264_queue_bytes = h264_queue_bytes
        self.header_chunk = header_chunk
        self._sessions = {}
        self._lock = threading.Lock()
        self.total_drops = 0

    def attach(self, session: ClientSession):
        with self._lock:
            self._sessions[session.id] = session

    def detach(self, session: ClientSession):
        with self._lock:
            self._sessions.pop(session.id, None)

    def client_count(self) -> int:
        with self._lock:
            return len(self._sessions)

    def sessions(self):
        with self._lock:
            return list(self._sessions.values())

    def broadcast(self, chunk: bytes, *, is_keyframe: bool = True,
                  seq: int = None):
        evicted = []
        for session in self.sessions():
            with session.cond:
                if session.state == CLOSING:
                    continue
                if self.kind == KIND_H264:
                    if session.state == AWAITING_KEYFRAME:
                        if not is_keyframe:
                            continue
                        session.queue.append(self.header_chunk)
                        session.queued_bytes += len(self.header_chunk)
                        session.state = STREAMING
                    if (session.queued_bytes + len(chunk)
                            > self.h264_queue_bytes):
                        evicted.append(session)
                        continue
                    session.queue.append(chunk)
                    session.queued_bytes += len(chunk)
                else:
                    if len(session.queue) >= self.mpjpeg_queue_parts:
                        session.queue.pop(0)
                        session.frames_dropped += 1
                        with self._lock:
                            self.total_drops += 1
                    session.queue.append(chunk)
                    session.queued_bytes = sum(len(c) for c in session.queue)
                session.cond.notify()
        for session in evicted:
            log.info("%s client %d exceeded queue cap, disconnecting",
                     self.kind, session.id)
            session.close()
            self.detach(session)

    def stats_rows(self):
        rows = []
        for s in self.sessions():
            with s.cond:
                rows.append(SessionStats(
                    s.id, s.connected_at, s.state, s.bytes_sent,
                    s.frames_dropped, len(s.queue)))
        return rows

    def close_all(self):
        for session in self.sessions():
            session.close()
            self.detach(session)


def writer_loop(session: ClientSession, broadcaster: Broadcaster):
    """Drain the session queue into its socket until close or error."""
    try:
        while True:
            with session.cond:
                while not session.queue and session.state != CLOSING:
                    session.cond.wait(timeout=1.0)
                if session.state == CLOSING:
                    return
                chunk = session.queue.pop(0)
                session.queued_bytes -= len(chunk)
            session.sock.sendall(chunk)
            with session.cond:
                session.bytes_sent += len(chunk)
    except OSError:
        pass
    finally:
        session.close()
        broadcaster.detach(session)


def drain_http_request(sock) -> bytes:
    """Read and discard inbound bytes until the first blank line.

    Browsers send a GET; raw TCP probes may send nothing, so give up
    after one second or 2 KiB, whichever comes first.
    """
    sock.settimeout(_REQUEST_TIMEOUT)
    data = b""
    try:
        while b"\r\n\r\n" not in data and len(data) < _REQUEST_CAP:
            chunk = sock.recv(1024)
            if not chunk:
                break
            data += chunk
    except socket.timeout:
        pass
    finally:
        sock.settimeout(None)
    return data


class StreamServer:
    """Accept loop plus one writer thread per client."""

    def __init__(self, kind, port, broadcaster: Broadcaster, *,
                 host="0.0.0.0", max_clients=MAX_CLIENTS, preamble=b""):
        self.kind = kind
        self.broadcaster = broadcaster
        self.max_clients = max_clients
        self.preamble = preamble
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            listener.close()
            raise StartupError(
                f"cannot listen on port {port} for the {kind} stream: {exc}"
            ) from exc
        listener.listen(16)
        self.listener = listener
        self.port = listener.getsockname()[1]
        self._accept_thread = None
        self._running = False

    def start(self):
        self._running = True
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"{self.kind}-accept", daemon=True)
        self._accept_thread.start()

    def _accept_loop(self):
        while self._running:
            try:
                sock, addr = self.listener.accept()
            except OSError:
                return
            if self.broadcaster.client_count() >= self.max_clients:
                log.warning("%s: rejecting %s, client limit reached",
                            self.kind, addr)
                sock.close()
                continue
            threading.Thread(target=self._serve_client, args=(sock,),
                             name=f"{self.kind}-client", daemon=True).start()

    def _serve_client(self, sock):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        session = ClientSession(sock, self.kind)
        if self.kind == KIND_MPJPEG:
            drain_http_request(sock)
            try:
                sock.sendall(self.preamble)
            except OSError:
                sock.close()
                return
            with session.cond:
                session.bytes_sent += len(self.preamble)
        self.broadcaster.attach(session)
        writer_loop(session, self.broadcaster)

    def close(self):
        self._running = False
        try:
            self.listener.close()
        except OSError:
            pass
        self.broadcaster.close_all()


def listen(kind, port, broadcaster, **kwargs) -> StreamServer:
    """Bind and start serving one stream; port 0 picks a free port."""
    server = StreamServer(kind, port, broadcaster, **kwargs)
    server.start()
    return server
