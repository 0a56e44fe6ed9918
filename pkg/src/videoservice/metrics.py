"""Live counters: sliding-window bandwidth, encode latency, tick pacing."""

import threading
import time
from collections import deque


class BandwidthMeter:
    """Bits/second over a sliding window of byte-count events."""

    def __init__(self, window_s: float = 5.0):
        self.window_s = window_s
        self._events = deque()  # (timestamp, nbytes)
        self._total = 0
        self._lock = threading.Lock()

    def add(self, nbytes: int, now: float = None):
        now = time.monotonic() if now is None else now
        with self._lock:
            self._events.append((now, nbytes))
            self._total += nbytes
            self._trim(now)

    def _trim(self, now):
        cutoff = now - self.window_s
        while self._events and self._events[0][0] <= cutoff:
            self._events.popleft()

    def rate_bps(self, now: float = None) -> float:
        now = time.monotonic() if now is None else now
        with self._lock:
            self._trim(now)
            window_bytes = sum(n for _, n in self._events)
            return window_bytes * 8 / self.window_s

    @property
    def bytes_total(self) -> int:
        with self._lock:
            return self._total


class LatencyWindow:
    """Mean and p95 over the most recent duration samples (milliseconds)."""

    def __init__(self, maxlen: int = 300):
        self._samples = deque(maxlen=maxlen)
        self._lock = threading.Lock()

    def add(self, ms: float):
        with self._lock:
            self._samples.append(ms)

    def summary(self):
        with self._lock:
            samples = sorted(self._samples)
        if not samples:
            return {"mean": 0.0, "p95": 0.0}
        mean = sum(samples) / len(samples)
        p95 = samples[min(len(samples) - 1, int(0.95 * (len(samples) - 1)))]
        return {"mean": round(mean, 3), "p95": round(p95, 3)}


class StreamMetrics:
    """Per-stream counters owned by the pipeline loop."""

    def __init__(self, window_s: float = 5.0):
        self.meter = BandwidthMeter(window_s)
        self.encode_ms = LatencyWindow()
        self._lock = threading.Lock()
        self.frames_encoded = 0
        self.failures = 0

    def frame_encoded(self, encode_ms: float):
        with self._lock:
            self.frames_encoded += 1
        self.encode_ms.add(encode_ms)

    def failed(self):
        with self._lock:
            self.failures += 1

    def snapshot(self, clients: int, drops: int):
        with self._lock:
            frames = self.frames_encoded
            failures = self.failures
        return {
            "bytes_total": self.meter.bytes_total,
            "bandwidth_bps": round(self.meter.rate_bps(), 1),
            "frames_encoded": frames,
            "encode_ms": self.encode_ms.summary(),
            "clients": clients,
            "drops": drops,
            "failures": failures,
        }


class PipelineMetrics:
    """Tick bookkeeping: counts, skips, deadline misses, recent rate."""

    def __init__(self, rate_window_s: float = 5.0):
        self.rate_window_s = rate_window_s
        self._ticks = deque(maxlen=4096)  # completion timestamps
        self._lock = threading.Lock()
        self.tick_count = 0
        self.ticks_skipped = 0
        self.deadline_missed = 0

    def tick_done(self, deadline_missed: bool, now: float = None):
        now = time.monotonic() if now is None else now
        with self._lock:
            self.tick_count += 1
            if deadline_missed:
                self.deadline_missed += 1
            self._ticks.append(now)

    def tick_skipped(self):
        with self._lock:
            self.ticks_skipped += 1

    def tick_rate(self, now: float = None) -> float:
        """Ticks per second over the recent window."""
        now = time.monotonic() if now is None else now
        cutoff = now - self.rate_window_s
        with self._lock:
            recent = sum(1 for t in self._ticks if t > cutoff)
        return recent / self.rate_window_s

    def snapshot(self):
        rate = self.tick_rate()
        with self._lock:
            return {
                "ticks": self.tick_count,
                "ticks_skipped": self.ticks_skipped,
                "deadline_missed": self.deadline_missed,
                "tick_rate": round(rate, 2),
            }
