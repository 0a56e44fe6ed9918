import json




import videoservice
from videoservice import cli, probe
from videoservice.probe import parse_annexb


def test_version(capsys):
    assert cli.main(["version"]) == 0
    assert capsys.readouterr().out.strip() == videoservice.__version__


def test_bench_small(capsys):
    rc = cli.main(["bench", "--encoder", "software-h264", "--width", "64",
                   "--height", "48", "--iterations", "3"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["iterations"] == 3
    assert doc["geometry"] == "64x48"


def test_bench_hardware_unavailable(capsys):
    rc = cli.main(["bench", "--encoder", "hardware-jpeg",
                   "--iterations", "1"])
    assert rc == 1
    assert "not available" in capsys.readouterr().err


def test_run_for_duration(capsys, monkeypatch):
    for var in ("VIDEOSERVICE_H264_PORT", "VIDEOSERVICE_MPJPEG_PORT",
                "VIDEOSERVICE_CONTROL_PORT"):
        monkeypatch.setenv(var, "0")
    rc = cli.main(["run", "--duration", "0.5", "--fps", "10",
                   "--host", "127.0.0.1", "--config", _tiny_config()])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ticks"] >= 3


_config_path = None


def _tiny_config():
    global _config_path
    if _config_path is None:
        import tempfile

        f = tempfile.NamedTemporaryFile(
            "w", suffix=".json", delete=False)
        json.dump({"hi_width": 128, "hi_height": 96,
                   "lo_width": 64, "lo_height": 48}, f)
        f.close()
        _config_path = f.name
    return _config_path


def test_config_file_unknown_key(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"hi_width": 128, "fps_cap": 10}')
    rc = cli.main(["run", "--config", str(bad), "--duration", "0.1"])
    assert rc == 1
    assert "fps_cap" in capsys.readouterr().err


def test_capture_source_fails_loud(capsys):
    rc = cli.main(["run", "--source", "capture", "--duration", "0.1",
                   "--host", "127.0.0.1", "--config", _tiny_config()])
    assert rc == 1
    assert "capture" in capsys.readouterr().err


class TestProbeCli:
    def test_mpjpeg_record(self, service_factory, capsys, tmp_path):
        service = service_factory(hi_width=128, hi_height=96,
                                  lo_width=64, lo_height=48)
        rc = probe.main(["mpjpeg",
                         f"127.0.0.1:{service.mpjpeg_server.port}",
                         "--count", "5", "--save-dir", str(tmp_path)])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["units_received"] >= 5
        assert doc["framing_errors"] == []
        saved = sorted(tmp_path.glob("part_*.jpg"))
        assert len(saved) == 5
        assert saved[0].read_bytes()[:2] == b"\xFF\xD8"

    def test_h264_record_and_reparse(self, service_factory, capsys,
                                     tmp_path):
        service = service_factory(hi_width=128, hi_height=96,
                                  lo_width=64, lo_height=48)
        out = tmp_path / "capture.h264"
        rc = probe.main(["h264", f"127.0.0.1:{service.h264_server.port}",
                         "--count", "8", "--out", str(out)])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["units_received"] >= 8
        assert doc["first_unit_kinds"][:3] == [7, 8, 5]
        # the saved stream re-parses clean
        nals, report = parse_annexb(out.read_bytes())
        assert report.framing_errors == []
        assert [n.nal_type for n in nals[:3]] == [7, 8, 5]

    def test_stats_pretty_print(self, service_factory, capsys):
        service = service_factory(hi_width=128, hi_height=96,
                                  lo_width=64, lo_height=48)
        url = f"http://127.0.0.1:{service.control_server.port}/api/stats"
        rc = probe.main(["stats", url])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert "streams" in doc and "pool" in doc

    def test_connection_refused_nonzero_exit(self, capsys):
        rc = probe.main(["mpjpeg", "127.0.0.1:1", "--count", "1",
                         "--timeout", "0.5"])
        assert rc == 1
        assert "cannot connect" in capsys.readouterr().err
