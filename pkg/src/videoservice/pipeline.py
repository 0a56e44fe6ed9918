"""The service core: a fixed-cadence loop driving both encoders.

Each tick reads a settings snapshot, pulls one frame pair, drives the
H.264 backend with the high-resolution frame and the JPEG backend with
the low-resolution one, frames the outputs and fans them out.  The
single per-stream network copy is charged here, when the encoded pool
buffer is serialized into wire bytes; with no clients on a stream the
unit is encoded but never serialized.

Also hosts the encoder benchmark harness (time only the encode call on
pre-generated frames) and assembles the stats document the control API
serves.
"""


import logging
import threading
import time
from dataclasses import dataclass

from . import config as config_mod
from .backends import open_h264_backend, open_jpeg_backend
from .config import ServiceConfig
from .control import ControlServer
from .errors import PoolExhaustedError, UnavailableError
from .frames import FrameGeometry, SourceConfig, open_source, synth_planes
from .h264 import annexb_frame, annexb_parameter_sets, encode_ipcm_planes, parameter_sets
from .jpeg import encode_jpeg_planes, scaled_quant_tables
from .metrics import PipelineMetrics, StreamMetrics
from .multipart import MultipartConfig, part_header, response_preamble
from .pool import BufferPool
from .server import KIND_H264, KIND_MPJPEG, Broadcaster, listen
from .settings import CameraSettings, SettingsStore

log = logging.getLogger(__name__)

# reference hardware figure printed (never asserted) next to benchmark
# results: the Raspberry Pi Zero 2 W hardware JPEG encoder takes about
# 4 ms per 800x600 frame
HARDWARE_REFERENCE_MS = 4.0

BENCH_KINDS = ("software-jpeg", "software-h264", "hardware-jpeg",
               "hardware-h264")


class _ChunkSink:
    """Write sink that avoids re-copying a single large chunk."""

    def __init__(self):
        self._chunks = []

    def write(self, data):
        self._chunks.append(data)
        return len(data)

    def value(self) -> bytes:
        if len(self._chunks) == 1:
            return self._chunks[0]
        return b"".join(self._chunks)


@dataclass(frozen=True)
class TickReport:
    seq: int
    encode_ms_jpeg: float
    encode_ms_h264: float
    bytes_mpjpeg: int
    bytes_h264: int
    copies_delta: int
    deadline_missed: bool


@dataclass(frozen=True)
class RunSummary:
    ticks: int
    ticks_skipped: int
    deadline_missed: int
    elapsed_s: float
    frames_h264: int
    frames_mpjpeg: int

    def to_dict(self):
        return self.__dict__.copy()


@dataclass(frozen=True)
class BenchmarkReport:
    encoder_kind: str
    width: int
    height: int
    iterations: int
    total_ms: float
    mean_ms_per_frame: float
    p95_ms: float
    max_sustainable_fps: float

    def to_dict(self):
        return {
            "encoder_kind": self.encoder_kind,
            "geometry": f"{self.width}x{self.height}",
            "iterations": self.iterations,
            "total_ms": round(self.total_ms, 3),
            "mean_ms_per_frame": round(self.mean_ms_per_frame, 4),
            "p95_ms": round(self.p95_ms, 4),
            "max_sustainable_fps": round(self.max_sustainable_fps, 2),
        }


def _pool_buffer_size(cfg: ServiceConfig) -> int:
    """One slot must hold any raw frame or any encoded unit."""
    hi, lo = cfg.hi, cfg.lo
    raw = max(hi.payload_size, lo.payload_size)
    mb_count = ((hi.width + 15) // 16) * ((hi.height + 15) // 16)
    ipcm = mb_count * 386 + 4096
    jpeg = lo.payload_size + 65536
    return max(raw, ipcm, jpeg)


class VideoService:
    """Owns the source, the pool, both encoders and all three servers."""

    def __init__(self, cfg: ServiceConfig = None):
        self.config = config_mod.validate(cfg or ServiceConfig())
        cfg = self.config
        self.settings = SettingsStore(CameraSettings(
            jpeg_quality=cfg.jpeg_quality, fps=cfg.fps))
        self.pool = BufferPool(cfg.pool_capacity, _pool_buffer_size(cfg))
        self.source = open_source(
            SourceConfig(cfg.hi, cfg.lo, cfg.fps, cfg.source),
            self.pool, self.settings)
        self.jpeg_backend = self._open_backend(
            lambda kind: open_jpeg_backend(kind, self.pool, cfg.jpeg_quality),
            cfg.jpeg_encoder, "JPEG")
        self.h264_backend = self._open_backend(
            lambda kind: open_h264_backend(kind, self.pool, cfg.hi_width,
                                           cfg.hi_height),
            cfg.h264_encoder, "H.264")

        self.mp_config = MultipartConfig(cfg.boundary,
                                         cfg.include_timestamp_header)
        self.preamble = response_preamble(self.mp_config)
        self.h264_broadcaster = Broadcaster(
            KIND_H264, h264_queue_bytes=cfg.h264_queue_bytes,
            header_chunk=annexb_parameter_sets(self.h264_backend.params))
        self.mpjpeg_broadcaster = Broadcaster(
            KIND_MPJPEG, mpjpeg_queue_parts=cfg.mpjpeg_queue_parts)

        self.metrics = PipelineMetrics(cfg.bandwidth_window_s)
        self.h264_metrics = StreamMetrics(cfg.bandwidth_window_s)
        self.mpjpeg_metrics = StreamMetrics(cfg.bandwidth_window_s)
        self.started_at = time.time()

        self.h264_server = None
        self.mpjpeg_server = None
        self.control_server = None
        self._stop = threading.Event()
        self._loop_thread = None

    def _open_backend(self, opener, kind, label):
        try:
            return opener(kind)
        except UnavailableError:
            if kind == "hardware" and self.config.hardware_fallback:
                log.warning("%s hardware encoder unavailable, "
                            "falling back to software", label)
                return opener("software")
            raise

    # -- serving ----------------------------------------------------------

    def start(self):
        """Bind all three servers; the loop is started separately."""
        cfg = self.config
        self.h264_server = listen(
            KIND_H264, cfg.h264_port, self.h264_broadcaster,
            host=cfg.host, max_clients=cfg.max_clients)
        self.mpjpeg_server = listen(
            KIND_MPJPEG, cfg.mpjpeg_port, self.mpjpeg_broadcaster,
            host=cfg.host, max_clients=cfg.max_clients, preamble=self.preamble)
        self.control_server = ControlServer(self, cfg.control_port,
                                            host=cfg.host)
        self.control_server.start()
        log.info("serving H.264 on %d, MPJPEG on %d, control on %d",
                 self.h264_server.port, self.mpjpeg_server.port,
                 self.control_server.port)
        return self

    def start_loop(self):
        self._loop_thread = threading.Thread(
            target=self.run, name="pipeline", daemon=True)
        self._loop_thread.start()

    def stop(self):
        self._stop.set()
        if self._loop_thread is not None:
            self._loop_thread.join(timeout=5)
        for server in (self.h264_server, self.mpjpeg_server):
            if server is not None:
                server.close()
        if self.control_server is not None:
            self.control_server.close()
        self.jpeg_backend.close()
        self.h264_backend.close()

    # -- the loop ---------------------------------------------------------

    def tick(self):
        """Run one tick; returns a TickReport, or None when skipped."""
        t0 = time.perf_counter()
        copies_before = self.pool.stats().copies
        settings = self.settings.get()
        self.jpeg_backend.configure(settings)
        self.h264_backend.configure(settings)

        try:
            hi, lo = self.source.next_frame_pair()
        except PoolExhaustedError:
            self.metrics.tick_skipped()
            return None

        leases = [hi.lease, lo.lease]
        streams = [
            ("h264", self.h264_backend, hi, self.h264_broadcaster,
             self.h264_metrics, self._wire_h264),
            ("jpeg", self.jpeg_backend, lo, self.mpjpeg_broadcaster,
             self.mpjpeg_metrics, self._wire_mpjpeg),
        ]
        units = {}
        try:
            for name, backend, frame, _, smetrics, _ in streams:
                try:
                    backend.submit(frame)
                except Exception:
                    log.exception("%s submit failed for seq %d",
                                  name, frame.seq)
                    smetrics.failed()
            for name, backend, frame, _, smetrics, _ in streams:
                try:
                    unit = backend.collect()
                except Exception:
                    units[name] = None
                    continue
                units[name] = unit
                leases.append(unit.lease)
                smetrics.frame_encoded(unit.encode_ms)

            bytes_out = {"h264": 0, "jpeg": 0}
            for name, _, _, broadcaster, smetrics, make_wire in streams:
                unit = units.get(name)
                if unit is None:
                    continue
                if broadcaster.client_count() == 0:
                    continue
                try:
                    wire = make_wire(unit)
                    broadcaster.broadcast(wire, is_keyframe=unit.is_keyframe,
                                          seq=unit.seq)
                except Exception:
                    log.exception("%s broadcast failed for seq %d",
                                  name, unit.seq)
                    smetrics.failed()
                    continue
                smetrics.meter.add(len(wire))
                bytes_out[name] = len(wire)
        finally:
            for lease in leases:
                self.pool.release(lease)

        period = 1.0 / settings.fps
        duration = time.perf_counter() - t0
        missed = duration > period
        self.metrics.tick_done(missed)
        h264_unit = units.get("h264")
        jpeg_unit = units.get("jpeg")
        return TickReport(
            seq=hi.seq,
            encode_ms_jpeg=jpeg_unit.encode_ms if jpeg_unit else 0.0,
            encode_ms_h264=h264_unit.encode_ms if h264_unit else 0.0,
            bytes_mpjpeg=bytes_out["jpeg"],
            bytes_h264=bytes_out["h264"],
            copies_delta=self.pool.stats().copies - copies_before,
            deadline_missed=missed,
        )

    def _wire_h264(self, unit):
        sink = _ChunkSink()
        self.pool.copy_out(unit.lease, sink, length=unit.length)
        return sink.value()

    def _wire_mpjpeg(self, unit):
        sink = _ChunkSink()
        sink.write(part_header(self.mp_config, unit.length, unit.timestamp_ns))
        self.pool.copy_out(unit.lease, sink, length=unit.length)
        sink.write(b"\r\n")
        return sink.value()

    def run(self, duration_s: float = None, max_ticks: int = None):
        """Paced loop; late ticks are never doubled up.

        Runs until the duration or tick budget is exhausted, or stop()
        is called; returns a RunSummary.
        """
        t_start = time.monotonic()
        ticks = skipped = missed = 0
        next_deadline = t_start
        while not self._stop.is_set():
            if duration_s is not None and time.monotonic() - t_start >= duration_s:
                break
            if max_ticks is not None and ticks + skipped >= max_ticks:
                break
            report = self.tick()
            if report is None:
                skipped += 1
            else:
                ticks += 1
                if report.deadline_missed:
                    missed += 1
            period = 1.0 / self.settings.get().fps
            next_deadline += period
            now = time.monotonic()
            if next_deadline <= now:
                next_deadline = now  # late: start fresh, no catch-up burst
            else:
                self._stop.wait(next_deadline - now)
        return RunSummary(
            ticks=ticks, ticks_skipped=skipped, deadline_missed=missed,
            elapsed_s=time.monotonic() - t_start,
            frames_h264=self.h264_metrics.frames_encoded,
            frames_mpjpeg=self.mpjpeg_metrics.frames_encoded)

    # -- stats ------------------------------------------------------------

    def stats_document(self) -> dict:
        pool = self.pool.stats()
        return {
            "uptime_s": round(time.time() - self.started_at, 3),
            "pipeline": self.metrics.snapshot(),
            "streams": {
                "h264": self.h264_metrics.snapshot(
                    self.h264_broadcaster.client_count(),
                    self.h264_broadcaster.total_drops),
                "mpjpeg": self.mpjpeg_metrics.snapshot(
                    self.mpjpeg_broadcaster.client_count(),
                    self.mpjpeg_broadcaster.total_drops),
            },
            "pool": {
                "copies": pool.copies,
                "maps": pool.maps,
                "live": pool.live,
                "capacity": pool.capacity,
            },
        }


def benchmark(encoder_kind: str, width: int, height: int, iterations: int,
              quality: int = 70) -> BenchmarkReport:
    """Encode pre-generated frames, timing only the encode call."""
    if encoder_kind not in BENCH_KINDS:
        raise UnavailableError(
            f"unknown encoder kind {encoder_kind!r}; expected one "
            f"of {', '.join(BENCH_KINDS)}")
    if encoder_kind.startswith("hardware"):
        raise UnavailableError(
            f"{encoder_kind} is not available on this machine")
    if iterations < 1:
        raise UnavailableError("iterations must be >= 1")

    geometry = FrameGeometry(width, height)
    frames = [synth_planes(i, geometry) for i in range(8)]
    if encoder_kind == "software-jpeg":
        tables = scaled_quant_tables(quality)

        def encode(i):
            y, u, v = frames[i % len(frames)]
            encode_jpeg_planes(y, u, v, tables)
    else:
        params = parameter_sets(width, height)

        def encode(i):
            y, u, v = frames[i % len(frames)]
            annexb_frame(params, encode_ipcm_planes(y, u, v, params, i))

    times_ms = []
    for i in range(iterations):
        t0 = time.perf_counter()
        encode(i)
        times_ms.append((time.perf_counter() - t0) * 1000)

    total = sum(times_ms)
    mean = total / iterations
    ordered = sorted(times_ms)
    p95 = ordered[min(len(ordered) - 1, int(0.95 * (len(ordered) - 1)))]
    return BenchmarkReport(
        encoder_kind=encoder_kind, width=width, height=height,
        iterations=iterations, total_ms=total, mean_ms_per_frame=mean,
        p95_ms=p95, max_sustainable_fps=1000.0 / mean if mean > 0 else 0.0)
