"""Frame sources: per tick, two raw YUV420 frames of the same scene.

The default source is a deterministic synthesizer standing in for the
camera module, so codec and wire tests have exact expected pixels.  A
capture backend would implement the same two-frame contract against
real hardware; selecting it without device code raises
:class:`UnavailableError`.
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnavailableError
from .pool import BufferLease, BufferPool
from .settings import CameraSettings

Y_MIN, Y_MAX = 16, 235
C_MIN, C_MAX = 16, 240


@dataclass(frozen=True)
class FrameGeometry:
    width: int
    height: int
    y_stride: int = 0
    c_stride: int = 0

    def __post_init__(self):
        ys = self.y_stride or self.width
        cs = self.c_stride or self.width // 2
        object.__setattr__(self, "y_stride", ys)
        object.__setattr__(self, "c_stride", cs)
        if self.width <= 0 or self.height <= 0:
            raise ConfigurationError(
                f"geometry {self.width}x{self.height} not positive")
        if self.width % 2 or self.height % 2:
            raise ConfigurationError(
                f"geometry {self.width}x{self.height} must be even "
                f"(4:2:0 subsampling)")
        if ys < self.width or cs < self.width // 2:
            raise ConfigurationError(
                f"strides ({ys}, {cs}) smaller than row size")

    @property
    def payload_size(self) -> int:
        return (self.y_stride * self.height
                + 2 * (self.c_stride * (self.height // 2)))


@dataclass(frozen=True)
class RawFrame:
    """One planar YUV420 image backed by a pool buffer lease."""

    geometry: FrameGeometry
    seq: int
    timestamp_ns: int
    lease: BufferLease


@dataclass(frozen=True)
class SourceConfig:
    hi: FrameGeometry = FrameGeometry(1920, 1080)
    lo: FrameGeometry = FrameGeometry(800, 600)
    fps: int = 30
    mode: str = "synthetic"

    def __post_init__(self):
        if not 1 <= self.fps <= 120:
            raise ConfigurationError(f"fps {self.fps} outside [1, 120]")
        if self.mode not in ("synthetic", "capture"):
            raise ConfigurationError(f"unknown source mode: {self.mode!r}")


def plane_views(pool: BufferPool, frame: RawFrame):
    """Map the frame's lease and return (Y, U, V) ndarray views.

    The views alias pool memory (one ``map`` is counted, no copy); rows
    are cropped to the visible width when strides exceed it.
    """
    g = frame.geometry
    view = pool.map_view(frame.lease)
    buf = np.frombuffer(view, dtype=np.uint8)
    ch = g.height // 2
    y_end = g.y_stride * g.height
    u_end = y_end + g.c_stride * ch
    v_end = u_end + g.c_stride * ch
    y = buf[:y_end].reshape(g.height, g.y_stride)[:, :g.width]
    u = buf[y_end:u_end].reshape(ch, g.c_stride)[:, :g.width // 2]
    v = buf[u_end:v_end].reshape(ch, g.c_stride)[:, :g.width // 2]
    return y, u, v


def _luma_lut(settings: CameraSettings) -> np.ndarray:
    """Per-pattern-value adjusted luma: clamp(16, 235, (m+16-128)*c + 128 + b*100)."""
    base = np.arange(220, dtype=np.float64) + Y_MIN
    adjusted = np.round((base - 128.0) * settings.contrast + 128.0
                        + settings.brightness * 100.0)
    return np.clip(adjusted, Y_MIN, Y_MAX).astype(np.uint8)


def synth_planes(seq: int, geometry: FrameGeometry,
                 settings: CameraSettings = None):
    """Deterministic test-card planes for one frame.

    Base pattern: Y = 16 + ((x + y + 4*seq) mod 220),
    U = 16 + ((cx + 2*seq) mod 225), V = 16 + ((cy + 2*seq) mod 225).
    Brightness/contrast adjust the luma plane only.

    The luma pattern is constant along anti-diagonals, so row y is a
    window into one precomputed strip; the returned planes are read-only
    views meant to be copied into their destination.
    """
    w, h = geometry.width, geometry.height
    if settings is None or (settings.brightness == 0.0
                            and settings.contrast == 1.0):
        lut = np.arange(Y_MIN, Y_MIN + 220, dtype=np.uint8)
    else:
        lut = _luma_lut(settings)
    strip_idx = (np.arange(w + h - 1, dtype=np.int64) + 4 * seq) % 220
    strip = lut[strip_idx]
    y = np.lib.stride_tricks.sliding_window_view(strip, w)[:h]
    cw, ch = w // 2, h // 2
    u_row = (C_MIN + (np.arange(cw, dtype=np.int64) + 2 * seq) % 225
             ).astype(np.uint8)
    v_col = (C_MIN + (np.arange(ch, dtype=np.int64) + 2 * seq) % 225
             ).astype(np.uint8)
    u = np.broadcast_to(u_row[None, :], (ch, cw))
    v = np.broadcast_to(v_col[:, None], (ch, cw))
    return y, u, v


class SyntheticSource:
    """Renders the test card at both resolutions, same seq and timestamp."""

    def __init__(self, config: SourceConfig, pool: BufferPool,
                 settings_view=None):
        self.config = config
        self.pool = pool
        self._settings_view = settings_view
        self._seq = 0
        self._t0 = time.monotonic_ns()

    def _render(self, geometry, seq, timestamp_ns, settings) -> RawFrame:
        lease = self.pool.acquire(geometry.payload_size)
        frame = RawFrame(geometry, seq, timestamp_ns, lease)
        try:
            y, u, v = plane_views(self.pool, frame)
            sy, su, sv = synth_planes(seq, geometry, settings)
            y[:] = sy
            u[:] = su
            v[:] = sv
        except Exception:
            self.pool.release(lease)
            raise
        return frame

    def next_frame_pair(self):
        """One tick: (hi, lo) frames sharing seq and timestamp.

        On pool exhaustion no lease is leaked and the error propagates
        for the caller to count a skipped tick.
        """
        settings = (self._settings_view.get()
                    if self._settings_view is not None else CameraSettings())
        seq = self._seq
        ts = time.monotonic_ns() - self._t0
        hi = self._render(self.config.hi, seq, ts, settings)
        try:
            lo = self._render(self.config.lo, seq, ts, settings)
        except Exception:
            self.pool.release(hi.lease)
            raise
        self._seq += 1
        return hi, lo

    def close(self):
        pass


def open_source(config: SourceConfig, pool: BufferPool, settings_view=None):
    """Open the configured frame source (synthetic needs no hardware)."""
    if config.mode == "capture":
        raise UnavailableError(
            "capture backend is a boundary only; no device implementation "
            "is built in")
    return SyntheticSource(config, pool, settings_view)
