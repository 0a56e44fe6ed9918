"""Client churn under a running loop: hunts races in attach/detach,
eviction and stats paths."""

import random
import socket
import threading
import time

from conftest import connect_h264, connect_mpjpeg, http_get_json


def test_client_churn_under_load(service_factory):
    service = service_factory(hi_width=320, hi_height=240,
                              lo_width=320, lo_height=240, fps=30)
    mp_port = service.mpjpeg_server.port
    h_port = service.h264_server.port
    url = f"http://127.0.0.1:{service.control_server.port}/api/stats"
    stop = threading.Event()
    problems = []

    def churn(kind, seed):
        rng = random.Random(seed)
        while not stop.is_set():
            try:
                sock = (connect_mpjpeg(mp_port) if kind == "mpjpeg"
                        else connect_h264(h_port))
            except OSError as exc:
                problems.append(f"connect {kind}: {exc}")
                return
            sock.settimeout(0.5)
            deadline = time.monotonic() + rng.uniform(0.05, 0.6)
            try:
                while time.monotonic() < deadline:
                    if rng.random() < 0.3:
                        time.sleep(0.05)  # stall a little
                        continue
                    sock.recv(1 << 15)
            except OSError:
                pass
            finally:
                sock.close()

    def poll_stats():
        while not stop.is_set():
            try:
                status, doc = http_get_json(url)
                pool = doc["pool"]
                if pool["live"] > pool["capacity"]:
                    problems.append(f"impossible pool stats {pool}")
            except Exception as exc:
                problems.append(f"stats: {exc}")
                return
            time.sleep(0.05)

    threads = [threading.Thread(target=churn, args=("mpjpeg", i))
               for i in range(4)]
    threads += [threading.Thread(target=churn, args=("h264", 10 + i))
                for i in range(4)]
    threads.append(threading.Thread(target=poll_stats))
    for t in threads:
        t.start()
    time.sleep(6.0)
    stop.set()
    for t in threads:
        t.join(timeout=5)
        assert not t.is_alive()

    assert problems == []
    # the loop survived: it is still producing fresh ticks
    ticks_before = service.metrics.tick_count
    time.sleep(0.5)
    assert service.metrics.tick_count > ticks_before
    # all churned clients are gone and nothing leaked
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        if (service.mpjpeg_broadcaster.client_count() == 0
                and service.h264_broadcaster.client_count() == 0):
            break
        time.sleep(0.1)
    status, doc = http_get_json(url)
    assert doc["pool"]["live"] <= 4  # at most one in-flight tick's leases
