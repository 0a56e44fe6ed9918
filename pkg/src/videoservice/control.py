"""HTTP remote control: settings, stats, console page, same-origin stream.

Serving the MPJPEG stream from this origin (GET /stream) absorbs the
proxy role a separate web server would otherwise need: the console
page and the video it embeds share one host and port, so browsers
never block the stream as cross-origin content.
"""

import json
import logging
import mimetypes
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import StartupError
from .server import ClientSession, KIND_MPJPEG, writer_loop
from .settings import SettingsValidationError

log = logging.getLogger(__name__)

PLACEHOLDER_PAGE = b"""<!doctype html>
<html><head><title>videoservice</title></head>
<body>
<h1>videoservice</h1>
<p>The service is running. No console is installed; endpoints:</p>
<ul>
<li><a href="/stream">/stream</a> (MPJPEG)</li>
<li><a href="/api/settings">/api/settings</a></li>
<li><a href="/api/stats">/api/stats</a></li>
</ul>
</body></html>
"""


class _ControlHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service = None
    console_dir = None

    def log_message(self, fmt, *args):
        log.debug("control: " + fmt, *args)

    def _send_json(self, status, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_asset(self, path: Path):
        data = path.read_bytes()
        ctype = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _console_asset(self, name: str):
        if self.console_dir is None:
            return None
        root = Path(self.console_dir).resolve()
        target = (root / name.lstrip("/")).resolve()
        if root not in target.parents and target != root:
            return None
        return target if target.is_file() else None

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/stream":
            self._serve_stream()
        elif path == "/api/settings":
            self._send_json(HTTPStatus.OK,
                            self.service.settings.get().to_dict())
        elif path == "/api/stats":
            self._send_json(HTTPStatus.OK, self.service.stats_document())
        elif path in ("/", "/index.html"):
            asset = self._console_asset("index.html")
            if asset is not None:
                self._send_asset(asset)
            else:
                self.send_response(HTTPStatus.OK)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length",
                                 str(len(PLACEHOLDER_PAGE)))
                self.end_headers()
                self.wfile.write(PLACEHOLDER_PAGE)
        else:
            asset = self._console_asset(path)
            if asset is not None:
                self._send_asset(asset)
            else:
                self._send_json(HTTPStatus.NOT_FOUND,
                                {"error": f"no such route: {path}"})

    def do_PUT(self):
        if self.path.split("?", 1)[0] != "/api/settings":
            self._send_json(HTTPStatus.NOT_FOUND,
                            {"error": f"no such route: {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            if length > 65536:
                self._send_json(HTTPStatus.BAD_REQUEST,
                                {"error": "request body too large"})
                return
            body = self.rfile.read(length)
            partial = json.loads(body) if body else {}
        except (ValueError, json.JSONDecodeError):
            self._send_json(HTTPStatus.BAD_REQUEST,
                            {"error": "body must be a JSON object"})
            return
        try:
            snapshot = self.service.settings.update(partial)
        except SettingsValidationError as exc:
            self._send_json(HTTPStatus.BAD_REQUEST,
                            {"error": exc.message, "field": exc.field})
            return
        self._send_json(HTTPStatus.OK, snapshot.to_dict())

    def do_POST(self):
        self._send_json(HTTPStatus.METHOD_NOT_ALLOWED,
                        {"error": "use GET or PUT"})

    def _serve_stream(self):
        """Subscribe this HTTP client as a regular MPJPEG session."""
        self.close_connection = True
        broadcaster = self.service.mpjpeg_broadcaster
        session = ClientSession(self.connection, KIND_MPJPEG)
        try:
            self.wfile.write(self.service.preamble)
            self.wfile.flush()
        except OSError:
            return
        with session.cond:
            session.bytes_sent += len(self.service.preamble)
        broadcaster.attach(session)
        writer_loop(session, broadcaster)


class ControlServer:
    def __init__(self, service, port: int, host: str = "0.0.0.0"):
        handler = type("Handler", (_ControlHandler,), {
            "service": service,
            "console_dir": service.config.console_dir,
        })
        try:
            self._httpd = ThreadingHTTPServer((host, port), handler)
        except OSError as exc:
            raise StartupError(
                f"cannot listen on port {port} for the control API: {exc}"
            ) from exc
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = None

    def start(self):
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="control", daemon=True)
        self._thread.start()

    def close(self):
        self._httpd.shutdown()
        self._httpd.server_close()
