"""
relayhouse.api - HTTP wire API and server-sent event stream for the daemon.

Endpoints (JSON bodies throughout):

    GET  /v1/state                      full daemon snapshot
    POST /v1/zones/{id}/light           {"on": bool}
    POST /v1/alarm/arm | disarm | reset
    GET  /v1/events?since=<seq>         log records after seq
    GET  /v1/stream?since=<seq>         server-sent events, one record per message
    POST /v1/sim/inject                 scenario event (simulator backend only)

Handlers never touch daemon state; every command goes through
ControlLoop.submit() and is answered by the loop thread.  Responses
carry permissive CORS headers so a dashboard served elsewhere can talk
to the daemon directly.  When a UI directory is configured, its static
files are served at /.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Tuple
from urllib.parse import parse_qs, urlparse

from .daemon import Arm, ControlLoop, DaemonError, Disarm, GetState, Inject, Reset, SetLight
from .sim import ScenarioError, event_from_dict

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

_ZONE_LIGHT = re.compile(r"^/v1/zones/([^/]+)/light$")
_ALARM_COMMANDS = {"arm": Arm, "disarm": Disarm, "reset": Reset}

SSE_KEEPALIVE_S = 5.0


class _BodyError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = violations


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "_Server"

    # -- plumbing --------------------------------------------------------------

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _send_json(self, status: int, obj: dict):
        body = json.dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _BodyError([f"body is not valid JSON: {exc}"]) from exc
        if not isinstance(obj, dict):
            raise _BodyError(["body must be a JSON object"])
        return obj

    def _submit(self, command) -> Tuple[int, dict]:
        try:
            result = self.server.loop.submit(command)
        except DaemonError:
            return 503, {"error": "control loop is not responding"}
        return result.status, result.body

    # -- request routing ---------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/v1/state":
            self._send_json(*self._submit(GetState()))
        elif url.path == "/v1/events":
            since = self._since(url)
            if since is None:
                return
            records = self.server.loop.log.since(since)
            self._send_json(
                200,
                {
                    "events": [
                        {
                            "seq": r.seq,
                            "ts_ms": r.ts_ms,
                            "kind": r.kind.value,
                            "payload": r.payload,
                        }
                        for r in records
                    ]
                },
            )
        elif url.path == "/v1/stream":
            since = self._since(url)
            if since is None:
                return
            self._stream(since)
        elif self.server.ui_dir is not None:
            self._static(url.path)
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self):
        url = urlparse(self.path)
        match = _ZONE_LIGHT.match(url.path)
        try:
            if match:
                body = self._read_body()
                unknown = set(body) - {"on"}
                violations = []
                if unknown:
                    violations.append(f"unknown keys: {sorted(unknown)}")
                if "on" not in body:
                    violations.append("missing key 'on'")
                elif not isinstance(body["on"], bool):
                    violations.append("'on' must be a boolean")
                if violations:
                    raise _BodyError(violations)
                self._send_json(*self._submit(SetLight(match.group(1), body["on"])))
            elif url.path.startswith("/v1/alarm/"):
                name = url.path.rsplit("/", 1)[1]
                command = _ALARM_COMMANDS.get(name)
                if command is None:
                    self._send_json(404, {"error": "not found"})
                    return
                self._send_json(*self._submit(command()))
            elif url.path == "/v1/sim/inject":
                body = self._read_body()
                try:
                    event = event_from_dict(body)
                except ScenarioError as exc:
                    raise _BodyError([str(exc)]) from exc
                self._send_json(*self._submit(Inject(event)))
            else:
                self._send_json(404, {"error": "not found"})
        except _BodyError as exc:
            self._send_json(
                400, {"error": "invalid request body", "violations": exc.violations}
            )

    def _since(self, url) -> Optional[int]:
        params = parse_qs(url.query)
        raw = params.get("since", ["0"])[0]
        try:
            return int(raw)
        except ValueError:
            self._send_json(
                400,
                {"error": "invalid request", "violations": ["since must be an integer"]},
            )
            return None

    # -- server-sent events ---------------------------------------------------------

    def _stream(self, since: int):
        event_log = self.server.loop.log
        subscription = event_log.subscribe()
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "keep-alive")
            self._cors()
            self.end_headers()

            last_sent = since
            for record in event_log.since(since):
                self._send_record(record)
                last_sent = record.seq
            while not self.server.stopping.is_set():
                try:
                    record = subscription.get(timeout=SSE_KEEPALIVE_S)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                if record.seq <= last_sent:
                    continue  # already delivered by the backfill
                self._send_record(record)
                last_sent = record.seq
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            event_log.unsubscribe(subscription)

    def _send_record(self, record):
        frame = f"id: {record.seq}\ndata: {record.to_json_line()}\n\n"
        self.wfile.write(frame.encode("utf-8"))
        self.wfile.flush()

    # -- static dashboard files --------------------------------------------------------

    def _static(self, path: str):
        root = self.server.ui_dir
        relative = "index.html" if path == "/" else path.lstrip("/")
        target = (root / relative).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._send_json(404, {"error": "not found"})
            return
        content = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(content)))
        self._cors()
        self.end_headers()
        self.wfile.write(content)


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    loop: ControlLoop
    ui_dir: Optional[Path]
    stopping: threading.Event


class ApiServer:
    """Background HTTP server bound to one control loop."""

    def __init__(
        self,
        loop: ControlLoop,
        host: str,
        port: int,
        ui_dir: Optional[str | Path] = None,
    ):
        self._httpd = _Server((host, port), _Handler)
        self._httpd.loop = loop
        self._httpd.ui_dir = Path(ui_dir) if ui_dir else None
        self._httpd.stopping = threading.Event()
        self._thread: Optional[threading.Thread] = None

    @property
    def host(self) -> str:
        return self._httpd.server_address[0]

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self):
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="relayhouse-api", daemon=True
        )
        self._thread.start()

    def stop(self):
        self._httpd.stopping.set()
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)
