import socket
import time

import pytest

from videoservice.errors import StartupError
from videoservice.multipart import MultipartConfig, response_preamble
from videoservice.probe import MpjpegParser
from videoservice.server import (Broadcaster, KIND_H264, KIND_MPJPEG,
                                 StreamServer, listen)

PREAMBLE = response_preamble(MultipartConfig())
HEADER_CHUNK = b"\x00\x00\x00\x01\x67SPS!\x00\x00\x00\x01\x68PPS!"


def make_mpjpeg_server(**kwargs):
    broadcaster = Broadcaster(KIND_MPJPEG, **kwargs)
    server = listen(KIND_MPJPEG, 0, broadcaster, host="127.0.0.1",
                    preamble=PREAMBLE)
    return server, broadcaster


def make_h264_server(**kwargs):
    kwargs.setdefault("header_chunk", HEADER_CHUNK)
    broadcaster = Broadcaster(KIND_H264, **kwargs)
    server = listen(KIND_H264, 0, broadcaster, host="127.0.0.1")
    return server, broadcaster


def wait_for(predicate, timeout=5.0, interval=0.01):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return False


def recv_exactly(sock, n, timeout=5.0):
    sock.settimeout(timeout)
    data = b""
    while len(data) < n:
        chunk = sock.recv(n - len(data))
        if not chunk:
            break
        data += chunk
    return data


def test_port_in_use_is_a_startup_error():
    server, broadcaster = make_mpjpeg_server()
    try:
        with pytest.raises(StartupError) as err:
            StreamServer(KIND_MPJPEG, server.port,
                         Broadcaster(KIND_MPJPEG), host="127.0.0.1")
        assert str(server.port) in str(err.value)
    finally:
        server.close()


def test_broadcast_with_zero_clients_is_noop():
    server, broadcaster = make_h264_server()
    try:
        broadcaster.broadcast(b"data", is_keyframe=True)
        assert broadcaster.client_count() == 0
    finally:
        server.close()


def test_mpjpeg_client_gets_preamble_then_parts():
    server, broadcaster = make_mpjpeg_server()
    try:
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        sock.sendall(b"GET / HTTP/1.1\r\n\r\n")
        preamble = recv_exactly(sock, len(PREAMBLE))
        assert preamble == PREAMBLE
        wait_for(lambda: broadcaster.client_count() == 1)
        part = b"--frame\r\nContent-Length: 3\r\n\r\nabc\r\n"
        broadcaster.broadcast(part)
        assert recv_exactly(sock, len(part)) == part
        sock.close()
    finally:
        server.close()


def test_mpjpeg_raw_probe_without_request_still_served():
    # a raw TCP probe that sends nothing gets the stream after the
    # one-second request timeout
    server, broadcaster = make_mpjpeg_server()
    try:
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        t0 = time.monotonic()
        data = recv_exactly(sock, len(PREAMBLE), timeout=5)
        assert data == PREAMBLE
        assert time.monotonic() - t0 < 3.0
        sock.close()
    finally:
        server.close()


def test_fanout_two_clients_identical_bytes():
    server, broadcaster = make_mpjpeg_server()
    try:
        socks = []
        for _ in range(2):
            s = socket.create_connection(("127.0.0.1", server.port),
                                         timeout=5)
            s.sendall(b"GET / HTTP/1.1\r\n\r\n")
            socks.append(s)
        assert wait_for(lambda: broadcaster.client_count() == 2)
        parts = [b"--frame\r\nContent-Length: 1\r\n\r\n%d\r\n" % i
                 for i in range(5)]
        for part in parts:
            broadcaster.broadcast(part)
            # pace like the pipeline would so nothing is dropped
            wait_for(lambda: all(not s.queue for s in broadcaster.sessions()))
        expected = PREAMBLE + b"".join(parts)
        received = [recv_exactly(s, len(expected)) for s in socks]
        assert received[0] == received[1] == expected
        for s in socks:
            s.close()
    finally:
        server.close()


def test_mpjpeg_drop_oldest_policy():
    broadcaster = Broadcaster(KIND_MPJPEG, mpjpeg_queue_parts=2)

    class FakeSession:
        pass

    from videoservice.server import ClientSession

    class NoSocket:
        def close(self):
            pass

    session = ClientSession(NoSocket(), KIND_MPJPEG)
    broadcaster.attach(session)
    broadcaster.broadcast(b"p0")
    broadcaster.broadcast(b"p1")
    assert session.frames_dropped == 0
    broadcaster.broadcast(b"p2")
    assert session.frames_dropped == 1
    assert session.queue == [b"p1", b"p2"]
    assert broadcaster.total_drops == 1


def test_h264_late_join_waits_for_keyframe_and_gets_headers():
    server, broadcaster = make_h264_server()
    try:
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        assert wait_for(lambda: broadcaster.client_count() == 1)
        broadcaster.broadcast(b"\x00\x00\x00\x01\x41delta", is_keyframe=False)
        broadcaster.broadcast(b"\x00\x00\x00\x01\x65idr00", is_keyframe=True)
        expected = HEADER_CHUNK + b"\x00\x00\x00\x01\x65idr00"
        assert recv_exactly(sock, len(expected)) == expected
        sock.close()
    finally:
        server.close()


def test_h264_slow_client_disconnected_on_overflow():
    server, broadcaster = make_h264_server(h264_queue_bytes=4096)
    try:
        slow = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        assert wait_for(lambda: broadcaster.client_count() == 1)
        chunk = b"\x00\x00\x00\x01\x65" + bytes(2048)
        for _ in range(40):
            broadcaster.broadcast(chunk, is_keyframe=True)
        assert wait_for(lambda: broadcaster.client_count() == 0)
        # the closed socket eventually surfaces EOF or a reset
        slow.settimeout(5)
        try:
            while slow.recv(65536):
                pass
            closed = True
        except OSError:
            closed = True
        assert closed
        slow.close()
    finally:
        server.close()


def test_session_stats_snapshot():
    server, broadcaster = make_mpjpeg_server()
    try:
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        sock.sendall(b"GET / HTTP/1.1\r\n\r\n")
        recv_exactly(sock, len(PREAMBLE))
        assert wait_for(lambda: broadcaster.client_count() == 1)
        rows = broadcaster.stats_rows()
        assert len(rows) == 1
        assert rows[0].bytes_sent == len(PREAMBLE)
        assert rows[0].frames_dropped == 0

        part = b"--frame\r\nContent-Length: 4\r\n\r\nabcd\r\n"
        for _ in range(3):
            broadcaster.broadcast(part)
            wait_for(lambda: all(not s.queue for s in broadcaster.sessions()))
        recv_exactly(sock, 3 * len(part))
        assert wait_for(
            lambda: broadcaster.stats_rows()[0].bytes_sent
            == len(PREAMBLE) + 3 * len(part))
        sock.close()
        # disconnected client disappears once the next broadcast pokes it
        assert wait_for(
            lambda: (broadcaster.broadcast(part) or
                     broadcaster.client_count() == 0), timeout=5)
    finally:
        server.close()


def test_client_limit():
    broadcaster = Broadcaster(KIND_MPJPEG)
    server = listen(KIND_MPJPEG, 0, broadcaster, host="127.0.0.1",
                    preamble=PREAMBLE, max_clients=1)
    try:
        first = socket.create_connection(("127.0.0.1", server.port),
                                         timeout=5)
        first.sendall(b"GET / HTTP/1.1\r\n\r\n")
        assert wait_for(lambda: broadcaster.client_count() == 1)
        second = socket.create_connection(("127.0.0.1", server.port),
                                          timeout=5)
        second.settimeout(5)
        assert second.recv(1024) == b""  # rejected immediately
        first.close()
        second.close()
    finally:
        server.close()


def test_whole_parts_under_drops():
    """A stalled-then-resumed client still receives whole parts only."""
    server, broadcaster = make_mpjpeg_server(mpjpeg_queue_parts=2)
    try:
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        sock.sendall(b"GET / HTTP/1.1\r\n\r\n")
        assert wait_for(lambda: broadcaster.client_count() == 1)
        # do not read: let drops accumulate
        big = b"X" * 20000
        for i in range(30):
            part = b"--frame\r\nContent-Length: %d\r\n\r\n%s\r\n" % (
                len(big) + 2, b"%02d" % i + big)
            broadcaster.broadcast(part)
        session = broadcaster.sessions()[0]
        assert session.frames_dropped > 0
        # resume reading everything that arrives
        sock.settimeout(1.0)
        received = b""
        try:
            while True:
                chunk = sock.recv(65536)
                if not chunk:
                    break
                received += chunk
        except OSError:
            pass
        sock.close()
        parser = MpjpegParser()
        parser.feed(received)
        # every completed part is intact; the tail may be cut mid-part
        # only because we stopped reading, not because of drops
        assert parser.payloads
        for payload in parser.payloads:
            assert len(payload) == len(big) + 2
        if parser.errors:
            assert all("truncated" in d or "SOI" in d or "EOI" in d
                       for _, d in parser.errors)
    finally:
        server.close()
