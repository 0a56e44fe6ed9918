"""Legal H.264 Annex-B production at desk scale.

The software encoder emits intra-only I_PCM slices: every macroblock
carries its raw samples, so the stream is losslessly verifiable while
still exercising SPS/PPS generation, emulation-prevention escaping and
start-code framing exactly as a hardware encoder's output would.

SPS choices (kept consistent with an I_PCM-only stream): baseline
profile (profile_idc 66, no constraint flags claimed), frame-only
coding, pic_order_cnt_type 2, no reference frames, level_idc picked
from the macroblock count.  Every frame is an IDR with CAVLC
signalling and slice_qp_delta 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError

NAL_IDR = 5
NAL_SPS = 7
NAL_PPS = 8

START_CODE = b"\x00\x00\x00\x01"

MB_TYPE_I_PCM = 25
# ue(25) is 9 bits (000011010); with 7 alignment bits every macroblock
# after the first starts byte-aligned as 0x0D 0x00 followed by 384 PCM bytes.
_MB_PREAMBLE = (0x0D, 0x00)
_MB_RECORD = 2 + 256 + 64 + 64

# smallest level whose MaxFS covers the frame's macroblock count
_LEVEL_BY_MAX_FS = ((1620, 30), (3600, 31), (5120, 32), (8192, 40),
                    (8704, 42), (22080, 50), (36864, 51))


class BitWriter:
    """MSB-first bit assembly for NAL payloads."""

    def __init__(self):
        self._bits = []

    def u(self, n, value):
        for i in range(n - 1, -1, -1):
            self._bits.append((value >> i) & 1)

    def ue(self, value):
        k = value + 1
        self.u(2 * k.bit_length() - 1, k)

    def se(self, value):
        self.ue(2 * value - 1 if value > 0 else -2 * value)

    def align_zero(self):
        while len(self._bits) % 8:
            self._bits.append(0)

    def rbsp_trailing(self):
        self._bits.append(1)
        self.align_zero()

    @property
    def bit_count(self):
        return len(self._bits)

    def tobytes(self):
        out = bytearray()
        acc = 0
        for i, b in enumerate(self._bits):
            acc = (acc << 1) | b
            if i % 8 == 7:
                out.append(acc)
                acc = 0
        rem = len(self._bits) % 8
        if rem:
            out.append(acc << (8 - rem))
        return bytes(out)


@dataclass(frozen=True)
class NalUnit:
    nal_type: int
    rbsp: bytes
    nal_ref_idc: int = 3

    @property
    def header_octet(self) -> int:
        return (self.nal_ref_idc << 5) | self.nal_type


@dataclass(frozen=True)
class ParameterSets:
    sps: NalUnit
    pps: NalUnit
    width: int
    height: int
    mb_width: int
    mb_height: int
    crop_right: int
    crop_bottom: int


def pick_level_idc(mb_count: int) -> int:
    for max_fs, level in _LEVEL_BY_MAX_FS:
        if mb_count <= max_fs:
            return level
    return _LEVEL_BY_MAX_FS[-1][1]


def parameter_sets(width: int, height: int) -> ParameterSets:
    """SPS and PPS for an intra-only 4:2:0 frame-coded stream."""
    if width % 2 or height % 2:
        raise ConfigurationError(
            f"dimensions {width}x{height} must be even")
    if not (0 < width <= 4096 and 0 < height <= 4096):
        raise ConfigurationError(
            f"dimensions {width}x{height} outside (0, 4096]")
    mb_width = (width + 15) // 16
    mb_height = (height + 15) // 16
    crop_right = (mb_width * 16 - width) // 2
    crop_bottom = (mb_height * 16 - height) // 2

    b = BitWriter()
    b.u(8, 66)                        # profile_idc: baseline
    b.u(8, 0)                         # constraint flags + reserved zero
    b.u(8, pick_level_idc(mb_width * mb_height))
    b.ue(0)                           # seq_parameter_set_id
    b.ue(0)                           # log2_max_frame_num_minus4
    b.ue(2)                           # pic_order_cnt_type
    b.ue(0)                           # max_num_ref_frames
    b.u(1, 0)                         # gaps_in_frame_num_value_allowed
    b.ue(mb_width - 1)
    b.ue(mb_height - 1)
    b.u(1, 1)                         # frame_mbs_only_flag
    b.u(1, 1)                         # direct_8x8_inference_flag
    if crop_right or crop_bottom:
        b.u(1, 1)
        b.ue(0)
        b.ue(crop_right)
        b.ue(0)
        b.ue(crop_bottom)
    else:
        b.u(1, 0)
    b.u(1, 0)                         # vui_parameters_present_flag
    b.rbsp_trailing()
    sps = NalUnit(NAL_SPS, b.tobytes())

    b = BitWriter()
    b.ue(0)                           # pic_parameter_set_id
    b.ue(0)                           # seq_parameter_set_id
    b.u(1, 0)                         # entropy_coding_mode_flag: CAVLC
    b.u(1, 0)                         # bottom_field_pic_order_in_frame
    b.ue(0)                           # num_slice_groups_minus1
    b.ue(0)                           # num_ref_idx_l0_default_active_minus1
    b.ue(0)                           # num_ref_idx_l1_default_active_minus1
    b.u(1, 0)                         # weighted_pred_flag
    b.u(2, 0)                         # weighted_bipred_idc
    b.se(0)                           # pic_init_qp_minus26
    b.se(0)                           # pic_init_qs_minus26
    b.se(0)                           # chroma_qp_index_offset
    b.u(1, 0)                         # deblocking_filter_control_present
    b.u(1, 0)                         # constrained_intra_pred_flag
    b.u(1, 0)                         # redundant_pic_cnt_present_flag
    b.rbsp_trailing()
    pps = NalUnit(NAL_PPS, b.tobytes())

    return ParameterSets(sps, pps, width, height, mb_width, mb_height,
                         crop_right, crop_bottom)


def _pad_to(plane, rows, cols):
    h, w = plane.shape
    if h == rows and w == cols:
        return plane
    return np.pad(plane, ((0, rows - h), (0, cols - w)), mode="edge")


def _mb_tiles(plane, size):
    h, w = plane.shape
    return (plane.reshape(h // size, size, w // size, size)
            .transpose(0, 2, 1, 3).reshape(-1, size * size))


def encode_ipcm_planes(y, u, v, params: ParameterSets,
                       frame_index: int) -> NalUnit:
    """One IDR slice carrying every macroblock as raw I_PCM samples."""
    h, w = y.shape
    if (h, w) != (params.height, params.width):
        raise ContractError(
            f"frame {w}x{h} does not match parameter sets "
            f"{params.width}x{params.height}")
    mbw, mbh = params.mb_width, params.mb_height
    yt = _mb_tiles(_pad_to(y, mbh * 16, mbw * 16), 16)
    ut = _mb_tiles(_pad_to(u, mbh * 8, mbw * 8), 8)
    vt = _mb_tiles(_pad_to(v, mbh * 8, mbw * 8), 8)
    n_mb = yt.shape[0]

    b = BitWriter()
    b.ue(0)                           # first_mb_in_slice
    b.ue(7)                           # slice_type: I (all slices I)
    b.ue(0)                           # pic_parameter_set_id
    b.u(4, 0)                         # frame_num (log2_max_frame_num = 4)
    b.ue(frame_index % 65536)         # idr_pic_id
    b.u(1, 0)                         # no_output_of_prior_pics_flag
    b.u(1, 0)                         # long_term_reference_flag
    b.se(0)                           # slice_qp_delta
    b.ue(MB_TYPE_I_PCM)               # first macroblock
    b.align_zero()                    # pcm_alignment_zero_bit
    head = b.tobytes()

    first_mb = np.concatenate([yt[0], ut[0], vt[0]]).tobytes()
    if n_mb > 1:
        records = np.empty((n_mb - 1, _MB_RECORD), dtype=np.uint8)
        records[:, 0] = _MB_PREAMBLE[0]
        records[:, 1] = _MB_PREAMBLE[1]
        records[:, 2:258] = yt[1:]
        records[:, 258:322] = ut[1:]
        records[:, 322:386] = vt[1:]
        tail = records.tobytes()
    else:
        tail = b""
    # rbsp_stop_one_bit lands on a fresh byte: PCM data is byte-aligned
    return NalUnit(NAL_IDR, head + first_mb + tail + b"\x80")


def escape_ebsp(rbsp: bytes) -> bytes:
    """Insert emulation-prevention bytes: 00 00 [00-03] -> 00 00 03 xx."""
    if len(rbsp) < 3:
        return rbsp
    b = np.frombuffer(rbsp, dtype=np.uint8)
    hits = np.nonzero((b[:-2] == 0) & (b[1:-1] == 0) & (b[2:] <= 3))[0]
    if not len(hits):
        return rbsp
    # an insertion restarts the zero run, so candidates closer than two
    # bytes to the previous insertion no longer match
    selected = []
    last = -2
    for p in hits:
        if p >= last + 2:
            selected.append(p)
            last = p
    return np.insert(b, np.asarray(selected) + 2, 3).tobytes()


def unescape_ebsp(ebsp: bytes) -> bytes:
    """Remove emulation-prevention bytes (exact inverse of escape_ebsp)."""
    if len(ebsp) < 3:
        return ebsp
    b = np.frombuffer(ebsp, dtype=np.uint8)
    hits = np.nonzero((b[:-2] == 0) & (b[1:-1] == 0) & (b[2:] == 3))[0]
    if not len(hits):
        return ebsp
    selected = []
    last = -3
    for p in hits:
        if p >= last + 3:
            selected.append(p)
            last = p
    return np.delete(b, np.asarray(selected) + 2).tobytes()


def nal_to_annexb(nal: NalUnit) -> bytes:
    """Start code + header octet + escaped payload."""
    return START_CODE + bytes([nal.header_octet]) + escape_ebsp(nal.rbsp)


def annexb_parameter_sets(params: ParameterSets) -> bytes:
    return nal_to_annexb(params.sps) + nal_to_annexb(params.pps)


def annexb_frame(params: ParameterSets, slice_nal: NalUnit,
                 include_parameter_sets: bool = False) -> bytes:
    """Byte-stream chunk for one frame; SPS+PPS first when requested."""
    chunk = nal_to_annexb(slice_nal)
    if include_parameter_sets:
        return annexb_parameter_sets(params) + chunk
    return chunk
