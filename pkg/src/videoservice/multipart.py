"""Byte-exact multipart/x-mixed-replace framing for the MPJPEG stream."""

import string
from dataclasses import dataclass

from .errors import ConfigurationError

# RFC 2046 boundary characters, minus space: the service never emits
# boundaries containing whitespace
_BOUNDARY_ALPHABET = set(string.ascii_letters + string.digits + "'()+_,-./:=?")

DEFAULT_BOUNDARY = "frame"


@dataclass(frozen=True)
class MultipartConfig:
    boundary: str = DEFAULT_BOUNDARY
    include_timestamp_header: bool = False

    def __post_init__(self):
        b = self.boundary
        if not 1 <= len(b) <= 70 or any(c not in _BOUNDARY_ALPHABET for c in b):
            raise ConfigurationError(
                f"boundary {b!r} must be 1-70 characters from the multipart "
                f"token alphabet with no spaces")


def response_preamble(config: MultipartConfig) -> bytes:
    return (
        b"HTTP/1.1 200 OK\r\n"
        b"Connection: close\r\n"
        b"Cache-Control: no-store\r\n"
        b"Content-Type: multipart/x-mixed-replace; boundary="
        + config.boundary.encode("ascii") + b"\r\n\r\n"
    )


def part_header(config: MultipartConfig, payload_length: int,
                timestamp_ns: int = None) -> bytes:
    lines = [b"--" + config.boundary.encode("ascii"),
             b"Content-Type: image/jpeg"]
    if config.include_timestamp_header and timestamp_ns is not None:
        lines.append(b"X-Timestamp: %d" % timestamp_ns)
    lines.append(b"Content-Length: %d" % payload_length)
    return b"\r\n".join(lines) + b"\r\n\r\n"


def wrap_part(jpeg_bytes: bytes, config: MultipartConfig,
              timestamp_ns: int = None) -> bytes:
    """One complete stream part: header, payload, CRLF."""
    return (part_header(config, len(jpeg_bytes), timestamp_ns)
            + jpeg_bytes + b"\r\n")
