"""Encoder backends behind one submit/collect contract.

The contract mirrors memory-to-memory device semantics: frames go in
by buffer lease, encoded units come back out in submit order, and at
most a fixed number of frames are in flight.  The software backends
complete synchronously but still honor the FIFO shape, so a hardware
backend can slot in behind the same interface.

Encoded output is written into a pool buffer: the pipeline charges the
single per-stream network copy when it serializes that buffer to wire
bytes, exactly once per emitted unit.
"""

import time
from dataclasses import dataclass

from .errors import BackpressureError, UnavailableError
from .frames import RawFrame, plane_views
from .h264 import ParameterSets, annexb_frame, encode_ipcm_planes, parameter_sets
from .jpeg import encode_jpeg_planes, scaled_quant_tables
from .pool import BufferLease, BufferPool

DEFAULT_DEPTH = 2

SOFTWARE = "software"
HARDWARE = "hardware"


@dataclass(frozen=True)
class EncodedUnit:
    """Output of an encoder for one frame, resident in the pool."""

    kind: str                 # "jpeg" | "h264"
    seq: int
    timestamp_ns: int
    lease: BufferLease
    length: int
    is_keyframe: bool
    width: int
    height: int
    nal_types: tuple = ()     # for h264: NAL types inside the chunk
    quality: int = None       # for jpeg
    encode_ms: float = 0.0


class _FifoBackend:
    """Shared submit/collect bookkeeping for the software backends."""

    kind = SOFTWARE

    def __init__(self, pool: BufferPool, depth: int = DEFAULT_DEPTH):
        self.pool = pool
        self.depth = depth
        self._done = []

    def submit(self, frame: RawFrame):
        if len(self._done) >= self.depth:
            raise BackpressureError(
                f"encoder already has {self.depth} frames in flight")
        t0 = time.perf_counter()
        payload, meta = self._encode(frame)
        encode_ms = (time.perf_counter() - t0) * 1000
        lease = self.pool.acquire(len(payload))
        view = self.pool.map_view(lease)
        view[:len(payload)] = payload
        self._done.append(EncodedUnit(
            kind=meta["kind"], seq=frame.seq,
            timestamp_ns=frame.timestamp_ns, lease=lease,
            length=len(payload), is_keyframe=meta["is_keyframe"],
            width=frame.geometry.width, height=frame.geometry.height,
            nal_types=meta.get("nal_types", ()),
            quality=meta.get("quality"), encode_ms=encode_ms))

    def collect(self) -> EncodedUnit:
        if not self._done:
            raise BackpressureError("no completed unit to collect")
        return self._done.pop(0)

    def configure(self, settings):
        pass

    def close(self):
        for unit in self._done:
            self.pool.release(unit.lease)
        self._done.clear()


class SoftwareJpegBackend(_FifoBackend):
    """Baseline JFIF encoder fed by the frame's buffer lease."""

    def __init__(self, pool: BufferPool, quality: int = 70,
                 depth: int = DEFAULT_DEPTH):
        super().__init__(pool, depth)
        self._tables = scaled_quant_tables(quality)

    def configure(self, settings):
        if settings.jpeg_quality != self._tables.quality:
            self._tables = scaled_quant_tables(settings.jpeg_quality)

    def _encode(self, frame: RawFrame):
        y, u, v = plane_views(self.pool, frame)
        data = encode_jpeg_planes(y, u, v, self._tables)
        return data, {"kind": "jpeg", "is_keyframe": True,
                      "quality": self._tables.quality}


class SoftwareH264Backend(_FifoBackend):
    """Intra-only I_PCM producer; every frame is an IDR."""

    def __init__(self, pool: BufferPool, width: int, height: int,
                 depth: int = DEFAULT_DEPTH):
        super().__init__(pool, depth)
        self.params: ParameterSets = parameter_sets(width, height)

    def _encode(self, frame: RawFrame):
        y, u, v = plane_views(self.pool, frame)
        slice_nal = encode_ipcm_planes(y, u, v, self.params, frame.seq)
        chunk = annexb_frame(self.params, slice_nal)
        return chunk, {"kind": "h264", "is_keyframe": True,
                       "nal_types": (slice_nal.nal_type,)}


def open_jpeg_backend(kind: str, pool: BufferPool, quality: int,
                      depth: int = DEFAULT_DEPTH):
    if kind == SOFTWARE:
        return SoftwareJpegBackend(pool, quality, depth)
    if kind == HARDWARE:
        raise UnavailableError(
            "hardware JPEG encoder device is not available on this machine")
    raise UnavailableError(f"unknown JPEG encoder kind {kind!r}")


def open_h264_backend(kind: str, pool: BufferPool, width: int, height: int,
                      depth: int = DEFAULT_DEPTH):
    if kind == SOFTWARE:
        return SoftwareH264Backend(pool, width, height, depth)
    if kind == HARDWARE:
        raise UnavailableError(
            "hardware H.264 encoder device is not available on this machine")
    raise UnavailableError(f"unknown H.264 encoder kind {kind!r}")
