import numpy as np
import pytest

from videoservice.errors import ConfigurationError
from videoservice.frames import FrameGeometry, synth_planes
from videoservice.jpeg import (BASE_CHROMA_QUANT, BASE_LUMA_QUANT,
                               encode_jpeg, encode_jpeg_planes,
                               scaled_quant_tables)

from conftest import decode_jpeg_ycbcr, decode_jpeg_yuv420, psnr


def reference_scale(quality, base):
    """Straight naive transcription of the scaling law."""
    q = 1 if quality == 0 else quality
    s = 5000 // q if q < 50 else 200 - 2 * q
    out = []
    for b in base:
        v = (int(b) * s + 50) // 100
        out.append(min(255, max(1, v)))
    return out


def flat_planes(w, h, y_val=128, c_val=128):
    return (np.full((h, w), y_val, np.uint8),
            np.full((h // 2, w // 2), c_val, np.uint8),
            np.full((h // 2, w // 2), c_val, np.uint8))


class TestQuantTables:
    def test_quality_50_is_identity(self):
        tables = scaled_quant_tables(50)
        assert np.array_equal(tables.luma, BASE_LUMA_QUANT)
        assert np.array_equal(tables.chroma, BASE_CHROMA_QUANT)

    def test_quality_95_first_entry(self):
        # s = 200 - 190 = 10; floor((16*10 + 50)/100) = 2
        tables = scaled_quant_tables(95)
        assert BASE_LUMA_QUANT[0] == 16
        assert tables.luma[0] == 2

    def test_quality_0_clamps_to_255(self):
        # treated as 1 -> s = 5000 -> base 16 scales to 800, clamped
        tables = scaled_quant_tables(0)
        assert tables.luma[0] == 255

    @pytest.mark.parametrize("quality", [0, 1, 10, 49, 50, 51, 90, 95])
    def test_matches_bruteforce_formula(self, quality):
        tables = scaled_quant_tables(quality)
        assert list(tables.luma) == reference_scale(quality, BASE_LUMA_QUANT)
        assert list(tables.chroma) == reference_scale(quality,
                                                      BASE_CHROMA_QUANT)

    @pytest.mark.parametrize("quality", [96, 100, -1])
    def test_out_of_range_rejected(self, quality):
        with pytest.raises(ConfigurationError):
            scaled_quant_tables(quality)

    def test_entries_always_in_range(self):
        for quality in range(0, 96):
            tables = scaled_quant_tables(quality)
            for table in (tables.luma, tables.chroma):
                assert table.min() >= 1 and table.max() <= 255


def parse_jfif_markers(data: bytes):
    """Minimal marker walk, independent of the encoder internals."""
    assert data[:2] == b"\xFF\xD8"
    markers = ["SOI"]
    i = 2
    while i < len(data):
        assert data[i] == 0xFF, f"expected marker at {i}"
        marker = data[i + 1]
        if marker == 0xD9:
            markers.append("EOI")
            assert i + 2 == len(data)
            break
        length = int.from_bytes(data[i + 2:i + 4], "big")
        name = {0xE0: "APP0", 0xDB: "DQT", 0xC0: "SOF0", 0xC4: "DHT",
                0xDA: "SOS"}.get(marker, f"M{marker:02X}")
        markers.append(name)
        i += 2 + length
        if marker == 0xDA:
            # entropy data: scan for the EOI, checking FF escaping
            while i < len(data) - 1:
                if data[i] == 0xFF:
                    nxt = data[i + 1]
                    assert nxt == 0x00 or nxt == 0xD9, \
                        f"unescaped FF {nxt:02X} at {i}"
                    if nxt == 0xD9:
                        break
                    i += 2
                else:
                    i += 1
    return markers


class TestEncode:
    def test_flat_midgray_decodes_exactly(self):
        tables = scaled_quant_tables(70)
        image = encode_jpeg(*flat_planes(16, 16), tables)
        decoded = decode_jpeg_ycbcr(image.data)
        assert decoded.shape == (16, 16, 3)
        assert (decoded == 128).all()

    @pytest.mark.parametrize("quality", [0, 10, 50, 95])
    def test_flat_frames_round_trip_any_quality(self, quality):
        tables = scaled_quant_tables(quality)
        image = encode_jpeg(*flat_planes(32, 16), tables)
        assert (decode_jpeg_ycbcr(image.data) == 128).all()

    def test_marker_grammar(self):
        y, u, v = synth_planes(0, FrameGeometry(80, 48))
        data = encode_jpeg_planes(y, u, v, scaled_quant_tables(70))
        markers = parse_jfif_markers(data)
        assert markers == ["SOI", "APP0", "DQT", "DQT", "SOF0",
                           "DHT", "DHT", "DHT", "DHT", "SOS", "EOI"]

    def test_synthetic_psnr_at_quality_90(self):
        y, u, v = synth_planes(0, FrameGeometry(800, 600))
        image = encode_jpeg(y, u, v, scaled_quant_tables(90))
        dy, du, dv = decode_jpeg_yuv420(image.data)
        assert dy.shape == (600, 800)
        assert psnr(y, dy) >= 30.0

    def test_size_grows_with_quality(self):
        y, u, v = synth_planes(0, FrameGeometry(800, 600))
        sizes = []
        for quality in (10, 30, 50, 70, 90):
            sizes.append(len(encode_jpeg_planes(
                y, u, v, scaled_quant_tables(quality))))
        assert sizes == sorted(sizes)

    def test_determinism(self):
        y, u, v = synth_planes(3, FrameGeometry(64, 48))
        tables = scaled_quant_tables(70)
        assert (encode_jpeg_planes(y, u, v, tables)
                == encode_jpeg_planes(y, u, v, tables))

    def test_odd_block_geometry_pads_by_replication(self):
        # 24x24 -> chroma 12x12 needs padding to 16x16; flat input must
        # stay flat (replicated edges add no block activity), within the
        # +-1 a nonzero quantized DC coefficient may round by
        tables = scaled_quant_tables(70)
        image = encode_jpeg(*flat_planes(24, 24, y_val=200), tables)
        decoded = decode_jpeg_ycbcr(image.data)
        assert decoded.shape == (24, 24, 3)
        luma = decoded[:, :, 0].astype(int)
        assert len(np.unique(luma)) == 1
        assert abs(luma[0, 0] - 200) <= 1

    def test_decodes_at_every_grid_quality(self):
        y, u, v = synth_planes(1, FrameGeometry(160, 120))
        for quality in (10, 30, 50, 70, 90):
            image = encode_jpeg(y, u, v, scaled_quant_tables(quality))
            dy, _, _ = decode_jpeg_yuv420(image.data)
            assert dy.shape == (120, 160)

    def test_psnr_ordering_quality_90_vs_10(self):
        y, u, v = synth_planes(0, FrameGeometry(320, 240))
        hi = encode_jpeg_planes(y, u, v, scaled_quant_tables(90))
        lo = encode_jpeg_planes(y, u, v, scaled_quant_tables(10))
        assert psnr(y, decode_jpeg_yuv420(hi)[0]) >= psnr(
            y, decode_jpeg_yuv420(lo)[0])

    def test_uneven_chroma_shape_rejected(self):
        y = np.zeros((16, 16), np.uint8)
        u = np.zeros((8, 4), np.uint8)
        with pytest.raises(ConfigurationError):
            encode_jpeg_planes(y, u, u, scaled_quant_tables(70))

    def test_random_noise_frames_decode(self):
        rng = np.random.default_rng(42)
        for _ in range(3):
            y = rng.integers(16, 236, (48, 64), dtype=np.uint8)
            u = rng.integers(16, 241, (24, 32), dtype=np.uint8)
            v = rng.integers(16, 241, (24, 32), dtype=np.uint8)
            data = encode_jpeg_planes(y, u, v, scaled_quant_tables(90))
            parse_jfif_markers(data)
            dy, _, _ = decode_jpeg_yuv420(data)
            # worst-case content still lands in a sane fidelity band
            assert psnr(y, dy) > 20.0
