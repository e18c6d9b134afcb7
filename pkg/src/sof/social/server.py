"""Mock social-graph server: cursor-paginated tagged photos over HTTP.

GET /photos?after=<photo_id>&limit=<n> returns
{"data": [photo records], "paging": {"next": cursor}} in stable photo_id
order; the terminal page carries no next cursor. Image bytes are fetched
from GET /files/<name>.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .corpus import load_corpus_index, photo_record_to_dict

DEFAULT_PAGE_LIMIT = 25


class GraphState:
    def __init__(self, corpus_dir):
        self.corpus_dir = Path(corpus_dir)
        self.photos = load_corpus_index(corpus_dir)  # sorted by photo_id
        self.ids = [p.photo_id for p in self.photos]

    def page(self, after: str | None, limit: int) -> dict:
        start = 0
        if after:
            # cursor = last photo_id of the previous page
            import bisect
            start = bisect.bisect_right(self.ids, after)
        chunk = self.photos[start:start + limit]
        doc = {"data": [photo_record_to_dict(p) for p in chunk], "paging": {}}
        if start + limit < len(self.photos):
            doc["paging"]["next"] = chunk[-1].photo_id
        return doc


class _GraphHandler(BaseHTTPRequestHandler):
    state: GraphState = None  # set by serve_graph

    def log_message(self, fmt, *args):  # silence default stderr chatter
        pass

    def _send_json(self, code: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/photos":
            qs = parse_qs(url.query)
            after = qs.get("after", [None])[0]
            try:
                limit = int(qs.get("limit", [str(DEFAULT_PAGE_LIMIT)])[0])
            except ValueError:
                self._send_json(400, {"error": "bad limit"})
                return
            if limit < 1:
                self._send_json(400, {"error": "bad limit"})
                return
            self._send_json(200, self.state.page(after, limit))
        elif url.path.startswith("/files/"):
            name = url.path[len("/files/"):]
            if "/" in name or ".." in name:
                self._send_json(404, {"error": "not found"})
                return
            path = self.state.corpus_dir / name
            if not path.exists():
                self._send_json(404, {"error": "not found"})
                return
            blob = path.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", "application/octet-stream")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)
        else:
            self._send_json(404, {"error": "not found"})


class GraphServer:
    """A running mock graph server bound to 127.0.0.1 on an ephemeral port."""

    def __init__(self, corpus_dir, port: int = 0):
        state = GraphState(corpus_dir)
        handler = type("BoundGraphHandler", (_GraphHandler,), {"state": state})
        self.httpd = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def start(self) -> "GraphServer":
        self.thread.start()
        return self

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self) -> "GraphServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve_graph(corpus_dir, port: int = 0) -> GraphServer:
    """Validate the corpus and return a started server."""
    return GraphServer(corpus_dir, port=port).start()
