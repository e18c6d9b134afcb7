"""Owner-facing HTTP API and server-sent event stream.

Thin adapter over CloudHub: every route maps onto one hub command, errors
surface as JSON bodies with meaningful status codes. /events streams alert
and model-version notifications with heartbeat comments so clients can
detect silent stalls. Static console assets are served when a console
directory is configured.
"""

from __future__ import annotations

import json
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from ..errors import (
    AlertNotPending,
    NoSuchVersion,
    SofError,
    UnknownDevice,
    UnknownPerson,
)
from ..snapshot import snapshot_to_dict
from .hub import CloudHub
from .registry import LATEST

SSE_HEARTBEAT_S = 10.0

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
}


class HubApiServer:
    """HTTP front end for one hub; optionally runs the training-job worker."""

    def __init__(self, hub: CloudHub, port: int = 0,
                 console_dir=None, sse_heartbeat_s: float = SSE_HEARTBEAT_S,
                 run_worker: bool = True):
        self.hub = hub
        self.console_dir = Path(console_dir) if console_dir else None
        self.sse_heartbeat_s = sse_heartbeat_s
        handler = type("BoundHubHandler", (_HubHandler,), {"server_ref": self})
        self.httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._stop = threading.Event()
        self._threads = [threading.Thread(target=self.httpd.serve_forever, daemon=True)]
        if run_worker:
            self._threads.append(threading.Thread(target=self._worker_loop, daemon=True))

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "HubApiServer":
        for t in self._threads:
            t.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self) -> "HubApiServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _worker_loop(self) -> None:
        """Drain queued training jobs serially."""
        while not self._stop.wait(0.05):
            pending = self.hub.pending_jobs()
            if not pending:
                continue
            try:
                self.hub.run_training_job(pending[0])
            except SofError:
                pass  # recorded on the job


class _HubHandler(BaseHTTPRequestHandler):
    server_ref: HubApiServer = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass

    # -- plumbing ---------------------------------------------------------

    def _json(self, code: int, doc) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _bytes(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length))

    def _dispatch(self, method: str) -> None:
        hub = self.server_ref.hub
        url = urlparse(self.path)
        try:
            handled = self._route(method, url, hub)
        except (UnknownPerson, UnknownDevice, NoSuchVersion, KeyError) as exc:
            self._json(404, {"error": str(exc)})
            return
        except AlertNotPending as exc:
            self._json(409, {"error": str(exc)})
            return
        except (ValueError, json.JSONDecodeError) as exc:
            self._json(400, {"error": str(exc)})
            return
        except SofError as exc:
            self._json(422, {"error": str(exc)})
            return
        if not handled:
            self._json(404, {"error": f"no route for {method} {url.path}"})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    # -- routes -----------------------------------------------------------

    def _route(self, method: str, url, hub: CloudHub) -> bool:
        path = url.path

        if method == "GET" and path == "/alerts":
            status = parse_qs(url.query).get("status", [None])[0]
            self._json(200, {"alerts": [a.to_dict() for a in hub.get_alerts(status)]})
            return True

        m = re.fullmatch(r"/alerts/([^/]+)/label", path)
        if method == "POST" and m:
            alert, job = hub.label_alert(m.group(1), self._read_body())
            self._json(200, {"alert": alert.to_dict(), "job": job.to_dict()})
            return True

        m = re.fullmatch(r"/alerts/([^/]+)/dismiss", path)
        if method == "POST" and m:
            self._json(200, {"alert": hub.dismiss_alert(m.group(1)).to_dict()})
            return True

        if path == "/policy":
            if method == "GET":
                self._json(200, hub.get_policy().to_dict())
                return True
            if method == "PUT":
                self._json(200, hub.put_policy(self._read_body()).to_dict())
                return True

        if method == "GET" and path == "/persons":
            self._json(200, {"persons": hub.persons()})
            return True

        if method == "GET" and path == "/models":
            self._json(200, {"models": hub.model_infos()})
            return True

        if method == "GET" and path == "/models/latest":
            self._json(200, snapshot_to_dict(hub.snapshot_for(LATEST)))
            return True

        m = re.fullmatch(r"/models/(\d+)", path)
        if method == "GET" and m:
            self._json(200, snapshot_to_dict(hub.snapshot_for(int(m.group(1)))))
            return True

        if method == "POST" and path == "/jobs":
            self._json(200, {"job": hub.enqueue_manual_job().to_dict()})
            return True

        if method == "GET" and path == "/log/access":
            self._json(200, {"log": hub.access_log()})
            return True

        if method == "POST" and path == "/access/check":
            body = self._read_body()
            outcome = hub.check_access(body["person_id"], body["device_id"])
            self._json(200, {"outcome": outcome})
            return True

        m = re.fullmatch(r"/chips/([^/]+)", path)
        if method == "GET" and m and ".." not in m.group(1):
            chip_path = hub.root / "chips" / m.group(1)
            if not chip_path.exists():
                self._json(404, {"error": "no such chip"})
                return True
            self._bytes(200, chip_path.read_bytes(), "application/octet-stream")
            return True

        if method == "GET" and path == "/events":
            self._serve_events(hub)
            return True

        if method == "GET":
            return self._serve_static(path)

        return False

    # -- SSE ---------------------------------------------------------------

    def _serve_events(self, hub: CloudHub) -> None:
        events: queue.Queue = queue.Queue()
        sid = hub.subscribe(events.put)
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Connection", "close")
            self.end_headers()
            while True:
                try:
                    event = events.get(timeout=self.server_ref.sse_heartbeat_s)
                    payload = f"data: {json.dumps(event)}\n\n"
                except queue.Empty:
                    payload = ": heartbeat\n\n"
                self.wfile.write(payload.encode("utf-8"))
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            hub.unsubscribe(sid)

    # -- static console assets ----------------------------------------------

    def _serve_static(self, path: str) -> bool:
        root = self.server_ref.console_dir
        if root is None:
            return False
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return False
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._bytes(200, target.read_bytes(), ctype)
        return True
