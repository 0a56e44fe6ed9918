"""Service configuration from defaults, environment, file and flags.

Precedence (lowest to highest): built-in defaults, VIDEOSERVICE_*
environment variables, a JSON config file, command-line flags.
"""

import json
import os
from dataclasses import dataclass, fields, replace

from .errors import ConfigurationError
from .frames import FrameGeometry

ENV_PREFIX = "VIDEOSERVICE_"

DEFAULT_H264_PORT = 8888
DEFAULT_MPJPEG_PORT = 8887
DEFAULT_CONTROL_PORT = 8886


@dataclass(frozen=True)
class ServiceConfig:
    hi_width: int = 1920
    hi_height: int = 1080
    lo_width: int = 800
    lo_height: int = 600
    fps: int = 30
    jpeg_quality: int = 70
    jpeg_encoder: str = "software"
    h264_encoder: str = "software"
    hardware_fallback: bool = True
    source: str = "synthetic"
    host: str = "0.0.0.0"
    h264_port: int = DEFAULT_H264_PORT
    mpjpeg_port: int = DEFAULT_MPJPEG_PORT
    control_port: int = DEFAULT_CONTROL_PORT
    boundary: str = "frame"
    include_timestamp_header: bool = False
    mpjpeg_queue_parts: int = 2
    h264_queue_bytes: int = 8 * 1024 * 1024
    max_clients: int = 32
    pool_capacity: int = 12
    bandwidth_window_s: float = 5.0
    console_dir: str = None

    @property
    def hi(self) -> FrameGeometry:
        return FrameGeometry(self.hi_width, self.hi_height)

    @property
    def lo(self) -> FrameGeometry:
        return FrameGeometry(self.lo_width, self.lo_height)


# environment variable -> (field, parser)
_ENV_FIELDS = {
    "JPEG_QUALITY": ("jpeg_quality", int),
    "JPEG_ENCODER": ("jpeg_encoder", str),
    "H264_PORT": ("h264_port", int),
    "MPJPEG_PORT": ("mpjpeg_port", int),
    "CONTROL_PORT": ("control_port", int),
    "FPS": ("fps", int),
    "SOURCE": ("source", str),
}


def from_environment(config: ServiceConfig = None,
                     env=None) -> ServiceConfig:
    config = config or ServiceConfig()
    env = os.environ if env is None else env
    overrides = {}
    for suffix, (field, parse) in _ENV_FIELDS.items():
        raw = env.get(ENV_PREFIX + suffix)
        if raw is None:
            continue
        try:
            overrides[field] = parse(raw)
        except ValueError as exc:
            raise ConfigurationError(
                f"{ENV_PREFIX}{suffix}={raw!r}: {exc}") from exc
    return replace(config, **overrides) if overrides else config


def from_file(path: str, config: ServiceConfig = None) -> ServiceConfig:
    config = config or ServiceConfig()
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    known = {f.name for f in fields(ServiceConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(
            f"config {path} has unknown keys: {', '.join(sorted(unknown))}")
    return replace(config, **raw)


def validate(config: ServiceConfig) -> ServiceConfig:
    """Raise ConfigurationError on any out-of-range field."""
    config.hi
    config.lo
    if not 1 <= config.fps <= 120:
        raise ConfigurationError(f"fps {config.fps} outside [1, 120]")
    if not 0 <= config.jpeg_quality <= 95:
        raise ConfigurationError(
            f"jpeg_quality {config.jpeg_quality} outside [0, 95]")
    if config.jpeg_encoder not in ("software", "hardware"):
        raise ConfigurationError(
            f"jpeg_encoder must be software or hardware, "
            f"got {config.jpeg_encoder!r}")
    if config.source not in ("synthetic", "capture"):
        raise ConfigurationError(
            f"source must be synthetic or capture, got {config.source!r}")
    return config
