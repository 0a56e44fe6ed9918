"""Command line entry point: run the service, benchmark encoders."""

import argparse
import json
import logging
import signal
import sys
from dataclasses import replace

from . import __version__
from .config import ServiceConfig, from_environment, from_file, validate
from .errors import VideoServiceError
from .pipeline import HARDWARE_REFERENCE_MS, VideoService, benchmark


def _build_config(args) -> ServiceConfig:
    cfg = from_environment(ServiceConfig())
    if args.config:
        cfg = from_file(args.config, cfg)
    flag_fields = ("fps", "jpeg_quality", "jpeg_encoder", "source", "host",
                   "h264_port", "mpjpeg_port", "control_port", "console_dir")
    overrides = {name: getattr(args, name)
                 for name in flag_fields if getattr(args, name) is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    return validate(cfg)


def _cmd_run(args):
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    service = VideoService(_build_config(args))
    service.start()

    def stop(signum, frame):
        service._stop.set()

    signal.signal(signal.SIGINT, stop)
    signal.signal(signal.SIGTERM, stop)
    try:
        summary = service.run(duration_s=args.duration)
    finally:
        service.stop()
    print(json.dumps(summary.to_dict(), indent=2))
    return 0


def _cmd_bench(args):
    report = benchmark(args.encoder, args.width, args.height,
                       args.iterations, quality=args.quality)
    doc = report.to_dict()
    doc["hardware_reference_ms_per_frame"] = HARDWARE_REFERENCE_MS
    print(json.dumps(doc, indent=2))
    return 0


def _cmd_version(args):
    print(__version__)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="videoservice",
        description="Dual-stream video monitoring service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="start the service")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--fps", type=int)
    p.add_argument("--jpeg-quality", type=int, dest="jpeg_quality")
    p.add_argument("--jpeg-encoder", choices=("software", "hardware"),
                   dest="jpeg_encoder")
    p.add_argument("--source", choices=("synthetic", "capture"))
    p.add_argument("--host")
    p.add_argument("--h264-port", type=int, dest="h264_port")
    p.add_argument("--mpjpeg-port", type=int, dest="mpjpeg_port")
    p.add_argument("--control-port", type=int, dest="control_port")
    p.add_argument("--console-dir", dest="console_dir",
                   help="directory with web console assets")
    p.add_argument("--duration", type=float, default=None,
                   help="run for N seconds instead of until stopped")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="benchmark an encoder")
    p.add_argument("--encoder", default="software-jpeg",
                   choices=("software-jpeg", "software-h264",
                            "hardware-jpeg", "hardware-h264"))
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--height", type=int, default=600)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--quality", type=int, default=70)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("version", help="print the service version")
    p.set_defaults(func=_cmd_version)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VideoServiceError as exc:
        print(f"videoservice: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
