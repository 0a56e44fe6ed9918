"""Client-side parsers, I_PCM decoder and recording CLI.

These parsers are the wire-format oracles for the service: a browser-
equivalent MPJPEG parse driven purely by Content-Length, an Annex-B
splitter with emulation-prevention removal, and an exact decoder for
the I_PCM slices the software encoder produces.  The CLI connects to a
running service, records what it receives verbatim and prints a JSON
report.
"""

import argparse
import json
import os
import socket
import sys
import time
import urllib.request
from dataclasses import dataclass, field

import numpy as np

from .errors import VideoServiceError
from .h264 import NAL_IDR, NAL_PPS, NAL_SPS, NalUnit, ParameterSets, unescape_ebsp

SOI = b"\xFF\xD8"
EOI = b"\xFF\xD9"
START_CODE = b"\x00\x00\x00\x01"


class UnsupportedStreamError(VideoServiceError):
    """The probe met a construct outside the oracle's narrow scope."""


@dataclass
class ProbeReport:
    stream_kind: str
    units_received: int = 0
    bytes_received: int = 0
    bandwidth_bps: float = 0.0
    framing_errors: list = field(default_factory=list)  # (offset, description)
    first_unit_kinds: list = field(default_factory=list)

    def to_dict(self):
        return {
            "stream_kind": self.stream_kind,
            "units_received": self.units_received,
            "bytes_received": self.bytes_received,
            "bandwidth_bps": round(self.bandwidth_bps, 1),
            "framing_errors": [
                {"offset": o, "description": d} for o, d in self.framing_errors
            ],
            "first_unit_kinds": self.first_unit_kinds,
        }


# ---------------------------------------------------------------------------
# MPJPEG

_PREAMBLE_FIRST_LINE = b"HTTP/1.1 200 OK\r\n"
_MAX_FIRST_KINDS = 16


class MpjpegParser:
    """Incremental multipart/x-mixed-replace parser.

    Payload extraction is driven solely by Content-Length; boundary
    bytes inside a payload are never scanned for.  A structural error
    is recorded with the offset of the first violating byte and stops
    the parse (there is no resync without scanning).
    """

    def __init__(self):
        self._buf = bytearray()
        self._base = 0          # stream offset of _buf[0]
        self._state = "preamble"
        self._boundary = None
        self._need = 0
        self._payload_start = 0
        self.payloads = []
        self.errors = []
        self.headers_seen = []

    @property
    def failed(self):
        return self._state == "failed"

    def _fail(self, offset, description):
        self.errors.append((offset, description))
        self._state = "failed"

    def feed(self, data: bytes):
        """Feed received bytes; returns payloads completed by this call."""
        done_before = len(self.payloads)
        self._buf.extend(data)
        while self._state != "failed":
            if self._state == "preamble":
                if not self._step_preamble():
                    break
            elif self._state == "part_header":
                if not self._step_part_header():
                    break
            elif self._state == "payload":
                if not self._step_payload():
                    break
        return self.payloads[done_before:]

    def _consume(self, n):
        del self._buf[:n]
        self._base += n

    def _step_preamble(self):
        end = self._buf.find(b"\r\n\r\n")
        if end < 0:
            probe_len = min(len(self._buf), len(_PREAMBLE_FIRST_LINE))
            if self._buf[:probe_len] != _PREAMBLE_FIRST_LINE[:probe_len]:
                self._fail(
                    self._base + _first_diff(
                        self._buf[:probe_len], _PREAMBLE_FIRST_LINE),
                    "missing response preamble")
            return False
        head = bytes(self._buf[:end + 4])
        if not head.startswith(_PREAMBLE_FIRST_LINE):
            self._fail(self._base + _first_diff(head, _PREAMBLE_FIRST_LINE),
                       "missing response preamble")
            return False
        boundary = None
        for line in head[len(_PREAMBLE_FIRST_LINE):end].split(b"\r\n"):
            name, _, value = line.partition(b":")
            if name.strip().lower() == b"content-type":
                ctype = value.strip()
                if not ctype.startswith(b"multipart/x-mixed-replace"):
                    self._fail(self._base + head.find(line),
                               f"unexpected content type {ctype!r}")
                    return False
                _, _, battr = ctype.partition(b"boundary=")
                boundary = battr.strip()
        if not boundary:
            self._fail(self._base + end + 4,
                       "preamble lacks a multipart boundary")
            return False
        self._boundary = bytes(boundary)
        self._consume(end + 4)
        self._state = "part_header"
        return True

    def _step_part_header(self):
        end = self._buf.find(b"\r\n\r\n")
        expected = b"--" + self._boundary + b"\r\n"
        if end < 0:
            # cheap early mismatch check while waiting for more bytes
            probe_len = min(len(self._buf), len(expected))
            if self._buf[:probe_len] != expected[:probe_len]:
                self._fail(self._base + _first_diff(
                    self._buf[:probe_len], expected), "boundary mismatch")
            return False
        head = bytes(self._buf[:end + 4])
        if not head.startswith(expected):
            self._fail(self._base + _first_diff(head, expected),
                       "boundary mismatch")
            return False
        length = None
        headers = {}
        for line in head[len(expected):end].split(b"\r\n"):
            name, _, value = line.partition(b":")
            headers[name.strip().lower()] = value.strip()
        if b"content-length" in headers:
            try:
                length = int(headers[b"content-length"])
            except ValueError:
                length = None
        if length is None or length < 0:
            self._fail(self._base + end + 4,
                       "part lacks a valid Content-Length")
            return False
        self.headers_seen.append(headers)
        self._consume(end + 4)
        self._need = length
        self._payload_start = self._base
        self._state = "payload"
        return True

    def _step_payload(self):
        if len(self._buf) < self._need + 2:
            return False
        payload = bytes(self._buf[:self._need])
        trailer = bytes(self._buf[self._need:self._need + 2])
        if trailer != b"\r\n":
            self._fail(
                self._base + self._need + (0 if trailer[:1] != b"\r" else 1),
                "part not terminated by CRLF")
            return False
        if payload[:2] != SOI:
            self.errors.append((self._payload_start,
                                "payload does not start with SOI"))
        if payload[-2:] != EOI:
            self.errors.append((self._payload_start + max(0, self._need - 2),
                                "payload does not end with EOI"))
        self.payloads.append(payload)
        self._consume(self._need + 2)
        self._state = "part_header"
        return True

    def finish(self):
        """Mark end of stream; an unfinished part is a truncation error."""
        if self._state == "failed":
            return
        if self._state == "preamble" and (self._buf or self._base):
            self._fail(self._base + len(self._buf), "truncated preamble")
        elif self._state == "payload":
            self._fail(self._base + len(self._buf),
                       "truncated part payload")
        elif self._state == "part_header" and self._buf:
            self._fail(self._base + len(self._buf), "truncated part header")


def _first_diff(actual, expected):
    for i, (a, e) in enumerate(zip(actual, expected)):
        if a != e:
            return i
    return min(len(actual), len(expected))


def parse_mpjpeg(data: bytes):
    """Parse a complete captured stream -> (payloads, ProbeReport)."""
    parser = MpjpegParser()
    parser.feed(data)
    parser.finish()
    report = ProbeReport("mpjpeg")
    report.units_received = len(parser.payloads)
    report.bytes_received = len(data)
    report.framing_errors = list(parser.errors)
    report.first_unit_kinds = ["jpeg"] * min(len(parser.payloads),
                                             _MAX_FIRST_KINDS)
    return parser.payloads, report


# ---------------------------------------------------------------------------
# Annex-B

@dataclass(frozen=True)
class ParsedNal:
    nal_type: int
    nal_ref_idc: int
    offset: int          # stream offset of the start code
    ebsp: bytes          # payload after the header octet, still escaped

    @property
    def rbsp(self) -> bytes:
        return unescape_ebsp(self.ebsp)

    def to_nal_unit(self) -> NalUnit:
        return NalUnit(self.nal_type, self.rbsp, self.nal_ref_idc)


class AnnexbParser:
    """Incremental 4-byte-start-code splitter with header validation."""

    def __init__(self):
        self._buf = bytearray()
        self._base = 0
        self._started = False
        self.nals = []
        self.errors = []

    def feed(self, data: bytes):
        """Feed bytes; returns NALs completed by this call."""
        done_before = len(self.nals)
        self._buf.extend(data)
        if not self._started:
            if len(self._buf) < 4:
                return []
            if self._buf[:4] != START_CODE:
                self.errors.append(
                    (self._base + _first_diff(self._buf[:4], START_CODE),
                     "stream does not begin with a start code"))
                # skip leading garbage so later units still parse
                idx = self._buf.find(START_CODE)
                if idx < 0:
                    del self._buf[:-3]
                    self._base += max(0, len(self._buf) - 3)
                    return []
                self._consume(idx)
            self._started = True
        while True:
            nxt = self._buf.find(START_CODE, 4)
            if nxt < 0:
                break
            self._emit(bytes(self._buf[4:nxt]), self._base)
            self._consume(nxt)
        return self.nals[done_before:]

    def _consume(self, n):
        del self._buf[:n]
        self._base += n

    def _emit(self, unit: bytes, offset: int):
        if not unit:
            self.errors.append((offset + 4, "empty NAL unit"))
            return
        header = unit[0]
        if header & 0x80:
            self.errors.append((offset + 4, "forbidden_zero_bit set"))
            return
        self.nals.append(ParsedNal(header & 0x1F, (header >> 5) & 3,
                                   offset, unit[1:]))

    def finish(self):
        """Emit the final unit (terminated by end of stream)."""
        if self._started and len(self._buf) > 4:
            self._emit(bytes(self._buf[4:]), self._base)
            self._consume(len(self._buf))


def parse_annexb(data: bytes):
    """Parse a complete captured stream -> (nals, ProbeReport)."""
    parser = AnnexbParser()
    parser.feed(data)
    parser.finish()
    report = ProbeReport("h264")
    report.units_received = len(parser.nals)
    report.bytes_received = len(data)
    report.framing_errors = list(parser.errors)
    report.first_unit_kinds = [n.nal_type
                               for n in parser.nals[:_MAX_FIRST_KINDS]]
    return parser.nals, report


def scan_emulation_violations(ebsp: bytes):
    """Offsets of 00 00 0[0-2] sequences that escaping should have removed."""
    if len(ebsp) < 3:
        return []
    b = np.frombuffer(ebsp, dtype=np.uint8)
    return list(np.nonzero((b[:-2] == 0) & (b[1:-1] == 0) & (b[2:] <= 2))[0])


# ---------------------------------------------------------------------------
# I_PCM decoding (oracle for the software H.264 path)

class BitReader:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def bit(self):
        byte = self._data[self._pos >> 3]
        v = (byte >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return v

    def u(self, n):
        v = 0
        for _ in range(n):
            v = (v << 1) | self.bit()
        return v

    def ue(self):
        zeros = 0
        while self.bit() == 0:
            zeros += 1
            if zeros > 31:
                raise UnsupportedStreamError("exp-Golomb code too long")
        return (1 << zeros) - 1 + self.u(zeros) if zeros else 0

    def se(self):
        k = self.ue()
        return (k + 1) // 2 if k % 2 else -(k // 2)

    def align(self):
        self._pos = (self._pos + 7) & ~7

    @property
    def byte_pos(self):
        return self._pos >> 3

    @property
    def aligned(self):
        return self._pos % 8 == 0


def parse_sps(rbsp: bytes) -> ParameterSets:
    """Rebuild geometry from an SPS this service's encoder emitted."""
    r = BitReader(rbsp)
    profile = r.u(8)
    if profile != 66:
        raise UnsupportedStreamError(f"unsupported profile_idc {profile}")
    r.u(8)   # constraint flags
    r.u(8)   # level
    r.ue()   # sps id
    if r.ue() != 0:
        raise UnsupportedStreamError("unexpected log2_max_frame_num_minus4")
    if r.ue() != 2:
        raise UnsupportedStreamError("unexpected pic_order_cnt_type")
    r.ue()   # max_num_ref_frames
    r.u(1)   # gaps_in_frame_num_value_allowed
    mb_width = r.ue() + 1
    mb_height = r.ue() + 1
    if r.u(1) != 1:
        raise UnsupportedStreamError("interlaced streams not supported")
    r.u(1)   # direct_8x8_inference
    crop_right = crop_bottom = 0
    if r.u(1):
        if r.ue() != 0:
            raise UnsupportedStreamError("unexpected left crop")
        crop_right = r.ue()
        if r.ue() != 0:
            raise UnsupportedStreamError("unexpected top crop")
        crop_bottom = r.ue()
    if r.u(1):
        raise UnsupportedStreamError("VUI parameters not supported")
    width = mb_width * 16 - 2 * crop_right
    height = mb_height * 16 - 2 * crop_bottom
    return ParameterSets(NalUnit(NAL_SPS, rbsp), NalUnit(NAL_PPS, b""),
                         width, height, mb_width, mb_height,
                         crop_right, crop_bottom)


@dataclass(frozen=True)
class SliceInfo:
    first_mb: int
    slice_type: int
    frame_num: int
    idr_pic_id: int


def decode_ipcm(params: ParameterSets, slice_nal: NalUnit):
    """Exact sample recovery from an I_PCM-only IDR slice.

    Returns (y, u, v, SliceInfo) with planes cropped to the display
    window.  Raises UnsupportedStreamError on any non-PCM macroblock;
    this is an oracle for the service's own encoder, not a decoder.
    """
    if slice_nal.nal_type != NAL_IDR:
        raise UnsupportedStreamError(
            f"expected IDR slice, got NAL type {slice_nal.nal_type}")
    rbsp = slice_nal.rbsp
    r = BitReader(rbsp)
    first_mb = r.ue()
    slice_type = r.ue()
    if slice_type not in (2, 7):
        raise UnsupportedStreamError(f"not an I slice: type {slice_type}")
    r.ue()                        # pic_parameter_set_id
    frame_num = r.u(4)            # log2_max_frame_num fixed at 4 by our SPS
    idr_pic_id = r.ue()
    r.u(1)                        # no_output_of_prior_pics_flag
    r.u(1)                        # long_term_reference_flag
    r.se()                        # slice_qp_delta

    mbw, mbh = params.mb_width, params.mb_height
    n_mb = mbw * mbh
    yt = np.empty((n_mb, 256), dtype=np.uint8)
    ut = np.empty((n_mb, 64), dtype=np.uint8)
    vt = np.empty((n_mb, 64), dtype=np.uint8)
    buf = np.frombuffer(rbsp, dtype=np.uint8)

    def read_mb(i):
        mb_type = r.ue()
        if mb_type != 25:
            raise UnsupportedStreamError(
                f"macroblock {i} is not I_PCM (mb_type {mb_type})")
        r.align()
        o = r.byte_pos
        if o + 384 > len(buf):
            raise UnsupportedStreamError(f"slice truncated at macroblock {i}")
        yt[i] = buf[o:o + 256]
        ut[i] = buf[o + 256:o + 320]
        vt[i] = buf[o + 320:o + 384]
        r._pos = (o + 384) << 3

    read_mb(0)
    i = 1
    # after one aligned PCM macroblock the layout repeats every 386 bytes;
    # verify the pattern holds and decode the rest in bulk
    if i < n_mb:
        o = r.byte_pos
        rest = buf[o:o + (n_mb - 1) * 386]
        if len(rest) == (n_mb - 1) * 386:
            records = rest.reshape(n_mb - 1, 386)
            if (records[:, 0] == 0x0D).all() and (records[:, 1] == 0).all():
                yt[1:] = records[:, 2:258]
                ut[1:] = records[:, 258:322]
                vt[1:] = records[:, 322:386]
                r._pos = (o + (n_mb - 1) * 386) << 3
                i = n_mb
    while i < n_mb:
        read_mb(i)
        i += 1

    y = (yt.reshape(mbh, mbw, 16, 16).transpose(0, 2, 1, 3)
         .reshape(mbh * 16, mbw * 16))
    u = (ut.reshape(mbh, mbw, 8, 8).transpose(0, 2, 1, 3)
         .reshape(mbh * 8, mbw * 8))
    v = (vt.reshape(mbh, mbw, 8, 8).transpose(0, 2, 1, 3)
         .reshape(mbh * 8, mbw * 8))
    h, w = params.height, params.width
    return (y[:h, :w], u[:h // 2, :w // 2], v[:h // 2, :w // 2],
            SliceInfo(first_mb, slice_type, frame_num, idr_pic_id))


# ---------------------------------------------------------------------------
# CLI

def _connect(target: str, timeout: float):
    host, _, port = target.rpartition(":")
    if not host:
        raise ValueError(f"expected host:port, got {target!r}")
    sock = socket.create_connection((host, int(port)), timeout=timeout)
    return sock


def _record_mpjpeg(args):
    report = ProbeReport("mpjpeg")
    parser = MpjpegParser()
    t0 = time.monotonic()
    try:
        sock = _connect(args.target, args.timeout)
    except OSError as exc:
        print(f"probe: cannot connect to {args.target}: {exc}",
              file=sys.stderr)
        return 1
    saved = 0
    if args.save_dir:
        os.makedirs(args.save_dir, exist_ok=True)
    with sock:
        sock.sendall(b"GET /stream HTTP/1.1\r\nHost: probe\r\n\r\n")
        while len(parser.payloads) < args.count and not parser.failed:
            try:
                chunk = sock.recv(65536)
            except socket.timeout:
                break
            if not chunk:
                break
            report.bytes_received += len(chunk)
            for payload in parser.feed(chunk):
                if args.save_dir and saved < args.count:
                    path = f"{args.save_dir}/part_{saved:05d}.jpg"
                    with open(path, "wb") as f:
                        f.write(payload)
                    saved += 1
    elapsed = max(time.monotonic() - t0, 1e-9)
    report.units_received = len(parser.payloads)
    report.bandwidth_bps = report.bytes_received * 8 / elapsed
    report.framing_errors = list(parser.errors)
    report.first_unit_kinds = ["jpeg"] * min(report.units_received,
                                             _MAX_FIRST_KINDS)
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if not report.framing_errors else 2


def _record_h264(args):
    report = ProbeReport("h264")
    parser = AnnexbParser()
    t0 = time.monotonic()
    try:
        sock = _connect(args.target, args.timeout)
    except OSError as exc:
        print(f"probe: cannot connect to {args.target}: {exc}",
              file=sys.stderr)
        return 1
    out = open(args.out, "wb") if args.out else None
    try:
        with sock:
            while len(parser.nals) < args.count:
                try:
                    chunk = sock.recv(65536)
                except socket.timeout:
                    break
                if not chunk:
                    break
                report.bytes_received += len(chunk)
                if out:
                    out.write(chunk)
                parser.feed(chunk)
    finally:
        if out:
            out.close()
    elapsed = max(time.monotonic() - t0, 1e-9)
    report.units_received = len(parser.nals)
    report.bandwidth_bps = report.bytes_received * 8 / elapsed
    report.framing_errors = list(parser.errors)
    report.first_unit_kinds = [n.nal_type
                               for n in parser.nals[:_MAX_FIRST_KINDS]]
    print(json.dumps(report.to_dict(), indent=2))
    return 0 if not report.framing_errors else 2


def _show_stats(args):
    try:
        with urllib.request.urlopen(args.url, timeout=args.timeout) as resp:
            body = resp.read()
    except OSError as exc:
        print(f"probe: cannot fetch {args.url}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(json.loads(body), indent=2))
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="probe",
        description="Record and validate the video service's streams")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mpjpeg", help="collect MPJPEG parts")
    p.add_argument("target", help="host:port of the MPJPEG stream")
    p.add_argument("--save-dir", default=None)
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=_record_mpjpeg)

    p = sub.add_parser("h264", help="collect H.264 NAL units")
    p.add_argument("target", help="host:port of the H.264 stream")
    p.add_argument("--out", default=None, help="write raw stream to file")
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=_record_h264)

    p = sub.add_parser("stats", help="pretty-print the stats endpoint")
    p.add_argument("url")
    p.add_argument("--timeout", type=float, default=5.0)
    p.set_defaults(func=_show_stats)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
