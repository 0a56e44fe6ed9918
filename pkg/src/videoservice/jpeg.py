"""Baseline JFIF encoder for YUV420 frames.

Output is a standard baseline sequential JPEG: 8x8 forward DCT per
plane, quantization by quality-scaled tables, zigzag, run-length
symbols entropy-coded with the standard (reference) Huffman tables,
wrapped as SOI / APP0(JFIF) / DQT x2 / SOF0 / DHT x4 / SOS / EOI.
Right/bottom edge blocks are padded by replication; no restart
intervals and no optimized-table pass, so identical input and quality
always produce identical bytes.

The hot path is fully vectorized: coefficients for all blocks are
transformed at once and the entropy coder assembles one global
(codeword, bitlength) stream that is packed through a byte-scatter.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

QUALITY_MAX = 95

# Reference quantization tables (luminance / chrominance), row-major.
BASE_LUMA_QUANT = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99], dtype=np.int64)

BASE_CHROMA_QUANT = np.array([
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99], dtype=np.int64)

# zigzag[i] = row-major index of the i-th coefficient in zigzag order
ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63], dtype=np.int64)

# Standard Huffman table specs (BITS, HUFFVAL)
DC_LUMA_BITS = bytes([0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
DC_LUMA_VALS = bytes(range(12))
DC_CHROMA_BITS = bytes([0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0])
DC_CHROMA_VALS = bytes(range(12))
AC_LUMA_BITS = bytes([0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D])
AC_LUMA_VALS = bytes([
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06,
    0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44, 0x45,
    0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74, 0x75,
    0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3,
    0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9,
    0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4,
    0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA])
AC_CHROMA_BITS = bytes([0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77])
AC_CHROMA_VALS = bytes([
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41,
    0x51, 0x07, 0x61, 0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0, 0x15, 0x62, 0x72, 0xD1,
    0x0A, 0x16, 0x24, 0x34, 0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
    0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44,
    0x45, 0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74,
    0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A,
    0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
    0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7,
    0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
    0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF2, 0xF3, 0xF4,
    0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA])


def _build_code_table(bits, vals):
    """Canonical JPEG Huffman assignment -> (codes[256], lens[256])."""
    codes = np.zeros(256, dtype=np.uint32)
    lens = np.zeros(256, dtype=np.uint8)
    code = 0
    k = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            sym = vals[k]
            codes[sym] = code
            lens[sym] = length
            code += 1
            k += 1
        code <<= 1
    return codes, lens


# stacked lookup: row 0 = DC luma, 1 = AC luma, 2 = DC chroma, 3 = AC chroma
_CODES = np.zeros((4, 256), dtype=np.uint32)
_LENS = np.zeros((4, 256), dtype=np.uint8)
for _row, (_bits, _vals) in enumerate([
        (DC_LUMA_BITS, DC_LUMA_VALS), (AC_LUMA_BITS, AC_LUMA_VALS),
        (DC_CHROMA_BITS, DC_CHROMA_VALS), (AC_CHROMA_BITS, AC_CHROMA_VALS)]):
    _CODES[_row], _LENS[_row] = _build_code_table(_bits, _vals)

# orthonormal 8-point DCT-II basis; D @ block @ D.T equals the JPEG FDCT
_DCT = np.zeros((8, 8), dtype=np.float64)
for _u in range(8):
    _s = np.sqrt(1 / 8) if _u == 0 else np.sqrt(2 / 8)
    for _x in range(8):
        _DCT[_u, _x] = _s * np.cos((2 * _x + 1) * _u * np.pi / 16)
_DCT32 = _DCT.astype(np.float32)
_DCT32_T = _DCT32.T.copy()

# magnitude -> bit category (DC diffs stay below 2048 for 8-bit samples)
_SIZE_LUT = np.array([v.bit_length() for v in range(4096)], dtype=np.uint8)


@dataclass(frozen=True)
class QuantTables:
    luma: np.ndarray
    chroma: np.ndarray
    quality: int


@dataclass(frozen=True)
class JpegImage:
    data: bytes
    width: int
    height: int
    quality: int


def scaled_quant_tables(quality: int) -> QuantTables:
    """Scale the reference tables for a 0-95 quality setting.

    Quality 0 is treated as 1; the scale is 5000/q below 50 and
    200 - 2q at or above, every entry clamped to [1, 255].
    """
    if not isinstance(quality, int) or isinstance(quality, bool):
        raise ConfigurationError(f"quality must be an integer, got {quality!r}")
    if not 0 <= quality <= QUALITY_MAX:
        raise ConfigurationError(
            f"quality {quality} outside [0, {QUALITY_MAX}]")
    q = max(1, quality)
    s = 5000 // q if q < 50 else 200 - 2 * q
    luma = np.clip((BASE_LUMA_QUANT * s + 50) // 100, 1, 255)
    chroma = np.clip((BASE_CHROMA_QUANT * s + 50) // 100, 1, 255)
    return QuantTables(luma, chroma, quality)


def _pad_to(plane, rows, cols):
    h, w = plane.shape
    if h == rows and w == cols:
        return plane
    return np.pad(plane, ((0, rows - h), (0, cols - w)), mode="edge")


def _to_blocks(plane):
    """Plane with multiple-of-8 sides -> (N, 8, 8) in raster block order."""
    h, w = plane.shape
    return (plane.reshape(h // 8, 8, w // 8, 8)
            .transpose(0, 2, 1, 3).reshape(-1, 8, 8))


def _quantize(blocks_u8, qtable_zz32):
    f = blocks_u8.astype(np.float32) - 128.0
    coef = _DCT32 @ f @ _DCT32_T
    zz = coef.reshape(-1, 64)[:, ZIGZAG]
    return np.round(zz / qtable_zz32).astype(np.int16)


def _pack_bitstream(vals, lens):
    """Pack (value, bitlength) pairs big-endian and byte-stuff FF -> FF 00.

    Each value spans at most 5 output bytes once shifted to its bit
    offset; the contributions are bit-disjoint, so scattering them with
    a summing bincount is equivalent to OR-ing.
    """
    lens64 = lens.astype(np.int64)
    starts = np.empty(len(lens64) + 1, dtype=np.int64)
    starts[0] = 0
    np.cumsum(lens64, out=starts[1:])
    total_bits = int(starts[-1])
    nbytes = (total_bits + 7) // 8
    bytepos = starts[:-1] >> 3
    bitoff = (starts[:-1] & 7).astype(np.uint64)
    shifted = vals.astype(np.uint64) << (
        np.uint64(40) - lens64.astype(np.uint64) - bitoff)
    n = len(vals)
    pos = np.empty(5 * n, dtype=np.int64)
    weights = np.empty(5 * n, dtype=np.float64)
    for k in range(5):
        pos[k * n:(k + 1) * n] = bytepos + k
        weights[k * n:(k + 1) * n] = (
            (shifted >> np.uint64(8 * (4 - k))) & np.uint64(0xFF))
    acc = np.bincount(pos, weights=weights, minlength=nbytes + 5)
    packed = acc[:nbytes].astype(np.uint8)
    pad = (-total_bits) % 8
    if pad:
        packed[-1] |= (1 << pad) - 1
    stuff = np.nonzero(packed == 0xFF)[0]
    if len(stuff):
        packed = np.insert(packed, stuff + 1, 0)
    return packed.tobytes()


def _entropy_scan(y_q, u_q, v_q, mcu_cols, mcu_rows):
    """Interleaved scan (Y00 Y01 Y10 Y11 U V per MCU) -> entropy bytes."""
    bx = 2 * mcu_cols
    n_mcu = mcu_rows * mcu_cols
    r = np.arange(mcu_rows, dtype=np.int64)
    c = np.arange(mcu_cols, dtype=np.int64)
    top_left = (2 * r[:, None] * bx + 2 * c[None, :]).ravel()
    y_order = top_left[:, None] + np.array([0, 1, bx, bx + 1], dtype=np.int64)

    n_blocks = n_mcu * 6
    blocks = np.empty((n_blocks, 64), dtype=np.int16)
    luma_block = np.zeros(n_blocks, dtype=bool)
    mcu_base = np.arange(n_mcu, dtype=np.int64) * 6
    for k in range(4):
        blocks[mcu_base + k] = y_q[y_order[:, k]]
        luma_block[mcu_base + k] = True
    blocks[mcu_base + 4] = u_q
    blocks[mcu_base + 5] = v_q

    # DC: differential per component along the scan
    dc = blocks[:, 0].astype(np.int32)
    dc_diff = np.empty_like(dc)
    pos_in_mcu = np.arange(n_blocks, dtype=np.int64) % 6
    for sel in (luma_block, pos_in_mcu == 4, pos_in_mcu == 5):
        idx = np.nonzero(sel)[0]
        vals = dc[idx]
        d = np.empty_like(vals)
        d[0] = vals[0]
        d[1:] = vals[1:] - vals[:-1]
        dc_diff[idx] = d
    dc_size = _SIZE_LUT[np.abs(dc_diff)].astype(np.uint32)
    dc_amp = np.where(dc_diff < 0, dc_diff + (1 << dc_size) - 1,
                      dc_diff).astype(np.uint32)
    dc_tbl = np.where(luma_block, 0, 2)
    dc_val = (_CODES[dc_tbl, dc_size] << dc_size) | dc_amp
    dc_len = _LENS[dc_tbl, dc_size].astype(np.uint32) + dc_size

    # AC: run-length symbols from the nonzero coefficient positions
    ac = blocks[:, 1:]
    rows, cols = np.nonzero(ac)
    nnz = len(rows)
    if nnz:
        avals = ac[rows, cols].astype(np.int32)
        prev = np.empty(nnz, dtype=np.int64)
        prev[0] = -1
        prev[1:] = np.where(rows[1:] == rows[:-1], cols[:-1], -1)
        run = cols - prev - 1
        n_zrl = (run >> 4).astype(np.int64)
        size = _SIZE_LUT[np.abs(avals)].astype(np.uint32)
        amp = np.where(avals < 0, avals + (1 << size) - 1,
                       avals).astype(np.uint32)
        counts = n_zrl + 1
        ends = np.cumsum(counts)
        total = int(ends[-1])
        sym = np.full(total, 0xF0, dtype=np.uint16)  # ZRL filler
        amp_all = np.zeros(total, dtype=np.uint32)
        amp_len = np.zeros(total, dtype=np.uint32)
        sym[ends - 1] = (((run & 15) << 4) | size).astype(np.uint16)
        amp_all[ends - 1] = amp
        amp_len[ends - 1] = size
        sym_rows = np.repeat(rows, counts)
        ac_per_block = np.bincount(sym_rows, minlength=n_blocks).astype(np.int64)
        last_col = np.full(n_blocks, -1, dtype=np.int64)
        last_col[rows] = cols  # rows ascending: final write is the max column
    else:
        total = 0
        sym = amp_all = amp_len = sym_rows = None
        ac_per_block = np.zeros(n_blocks, dtype=np.int64)
        last_col = np.full(n_blocks, -1, dtype=np.int64)
    need_eob = last_col < 62

    # merge per block: [DC, AC symbols..., EOB?]
    per_block = 1 + ac_per_block + need_eob
    starts = np.empty(n_blocks + 1, dtype=np.int64)
    starts[0] = 0
    np.cumsum(per_block, out=starts[1:])
    out_n = int(starts[-1])
    out_vals = np.empty(out_n, dtype=np.uint32)
    out_lens = np.empty(out_n, dtype=np.uint32)

    out_vals[starts[:-1]] = dc_val
    out_lens[starts[:-1]] = dc_len

    if total:
        first_of_block = np.empty(n_blocks, dtype=np.int64)
        first_of_block[0] = 0
        np.cumsum(ac_per_block[:-1], out=first_of_block[1:])
        rank = np.arange(total, dtype=np.int64) - first_of_block[sym_rows]
        ac_pos = starts[sym_rows] + 1 + rank
        ac_tbl = np.where(luma_block[sym_rows], 1, 3)
        code_len = _LENS[ac_tbl, sym].astype(np.uint32)
        out_vals[ac_pos] = (_CODES[ac_tbl, sym] << amp_len) | amp_all
        out_lens[ac_pos] = code_len + amp_len

    eob_blocks = np.nonzero(need_eob)[0]
    eob_pos = starts[eob_blocks + 1] - 1
    eob_tbl = np.where(luma_block[eob_blocks], 1, 3)
    out_vals[eob_pos] = _CODES[eob_tbl, 0]
    out_lens[eob_pos] = _LENS[eob_tbl, 0]

    return _pack_bitstream(out_vals, out_lens)


def _segment(marker, payload):
    return bytes([0xFF, marker]) + struct.pack(">H", 2 + len(payload)) + payload


def encode_jpeg_planes(y, u, v, tables: QuantTables) -> bytes:
    """Encode planar YUV420 arrays (chroma at half resolution) to JFIF."""
    h, w = y.shape
    if h % 2 or w % 2:
        raise ConfigurationError(f"frame {w}x{h} must have even sides")
    if u.shape != (h // 2, w // 2) or v.shape != (h // 2, w // 2):
        raise ConfigurationError("chroma planes must be half resolution")
    mcu_cols = (w + 15) // 16
    mcu_rows = (h + 15) // 16

    lq_zz = tables.luma[ZIGZAG].astype(np.float32)
    cq_zz = tables.chroma[ZIGZAG].astype(np.float32)
    y_q = _quantize(_to_blocks(_pad_to(y, mcu_rows * 16, mcu_cols * 16)), lq_zz)
    u_q = _quantize(_to_blocks(_pad_to(u, mcu_rows * 8, mcu_cols * 8)), cq_zz)
    v_q = _quantize(_to_blocks(_pad_to(v, mcu_rows * 8, mcu_cols * 8)), cq_zz)
    entropy = _entropy_scan(y_q, u_q, v_q, mcu_cols, mcu_rows)

    parts = [b"\xFF\xD8"]
    parts.append(_segment(0xE0, b"JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00"))
    parts.append(_segment(
        0xDB, b"\x00" + bytes(tables.luma[ZIGZAG].astype(np.uint8))))
    parts.append(_segment(
        0xDB, b"\x01" + bytes(tables.chroma[ZIGZAG].astype(np.uint8))))
    sof = struct.pack(">BHHB", 8, h, w, 3)
    sof += bytes([1, 0x22, 0, 2, 0x11, 1, 3, 0x11, 1])
    parts.append(_segment(0xC0, sof))
    parts.append(_segment(0xC4, b"\x00" + DC_LUMA_BITS + DC_LUMA_VALS))
    parts.append(_segment(0xC4, b"\x10" + AC_LUMA_BITS + AC_LUMA_VALS))
    parts.append(_segment(0xC4, b"\x01" + DC_CHROMA_BITS + DC_CHROMA_VALS))
    parts.append(_segment(0xC4, b"\x11" + AC_CHROMA_BITS + AC_CHROMA_VALS))
    parts.append(_segment(0xDA, bytes([3, 1, 0x00, 2, 0x11, 3, 0x11, 0, 63, 0])))
    parts.append(entropy)
    parts.append(b"\xFF\xD9")
    return b"".join(parts)


def encode_jpeg(y, u, v, tables: QuantTables) -> JpegImage:
    h, w = y.shape
    return JpegImage(encode_jpeg_planes(y, u, v, tables), w, h, tables.quality)
