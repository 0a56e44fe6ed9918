import json
import socket
import threading
import time
import urllib.error
import urllib.request
from io import BytesIO

import numpy as np
import pytest

from videoservice.config import ServiceConfig
from videoservice.pipeline import VideoService


def decode_jpeg_ycbcr(data: bytes) -> np.ndarray:
    """Independent decode to a full-resolution (H, W, 3) YCbCr array."""
    from PIL import Image

    im = Image.open(BytesIO(data))
    im.draft("YCbCr", None)
    im.load()
    if im.mode != "YCbCr":
        im = im.convert("YCbCr")
    return np.asarray(im)


def decode_jpeg_yuv420(data: bytes):
    """Decoded planes with chroma subsampled back to the encoder grid."""
    arr = decode_jpeg_ycbcr(data)
    return arr[:, :, 0], arr[::2, ::2, 1], arr[::2, ::2, 2]


def psnr(reference: np.ndarray, decoded: np.ndarray) -> float:
    mse = np.mean((reference.astype(np.float64)
                   - decoded.astype(np.float64)) ** 2)
    if mse == 0:
        return float("inf")
    return 10 * np.log10(255.0 ** 2 / mse)


def make_service(**overrides) -> VideoService:
    base = dict(host="127.0.0.1", h264_port=0, mpjpeg_port=0, control_port=0)
    base.update(overrides)
    return VideoService(ServiceConfig(**base))


@pytest.fixture
def service_factory():
    services = []

    def factory(*, start_loop=True, **overrides):
        svc = make_service(**overrides)
        svc.start()
        if start_loop:
            svc.start_loop()
        services.append(svc)
        return svc

    yield factory
    for svc in services:
        svc.stop()


def http_get_json(url, timeout=5.0):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.status, json.loads(resp.read())


def http_put_json(url, payload, timeout=5.0):
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(), method="PUT",
        headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def connect_mpjpeg(port, timeout=10.0):
    sock = socket.create_connection(("127.0.0.1", port), timeout=timeout)
    sock.sendall(b"GET /stream HTTP/1.1\r\nHost: test\r\n\r\n")
    return sock


def connect_h264(port, timeout=10.0):
    return socket.create_connection(("127.0.0.1", port), timeout=timeout)


def collect_mpjpeg_parts(port, count, timeout=15.0):
    """Collect `count` parts; returns (parts, parser)."""
    from videoservice.probe import MpjpegParser

    parser = MpjpegParser()
    sock = connect_mpjpeg(port, timeout)
    deadline = time.monotonic() + timeout
    try:
        while len(parser.payloads) < count and not parser.failed:
            if time.monotonic() > deadline:
                break
            chunk = sock.recv(1 << 16)
            if not chunk:
                break
            parser.feed(chunk)
    finally:
        sock.close()
    return parser.payloads[:count], parser


def collect_h264_nals(port, count, timeout=20.0):
    from videoservice.probe import AnnexbParser

    parser = AnnexbParser()
    sock = connect_h264(port, timeout)
    deadline = time.monotonic() + timeout
    try:
        while len(parser.nals) < count:
            if time.monotonic() > deadline:
                break
            chunk = sock.recv(1 << 20)
            if not chunk:
                break
            parser.feed(chunk)
    finally:
        sock.close()
    return parser.nals[:count], parser


class DrainClient:
    """Background reader that keeps a stream socket drained."""

    def __init__(self, port, kind="h264"):
        if kind == "mpjpeg":
            self.sock = connect_mpjpeg(port)
        else:
            self.sock = connect_h264(port)
        self.bytes_read = 0
        self._thread = threading.Thread(target=self._drain, daemon=True)
        self._thread.start()

    def _drain(self):
        try:
            while True:
                chunk = self.sock.recv(1 << 20)
                if not chunk:
                    return
                self.bytes_read += len(chunk)
        except OSError:
            return

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
