"""HTTP front end for the annotation store.

    GET  /items/next?annotator=ID  -> 200 AnnotationItem JSON | 204 done
    POST /judgments                -> 201 accepted | 409 conflict
    GET  /report                   -> AggregateReport JSON (partial allowed)
    GET  /health                   -> {"status": "ok"}
    GET  /ui, /ui/*                -> static annotation UI assets

The port comes from ANNOTATION_PORT unless given explicitly. The store
serializes journal writes; the threaded server is safe on top of it.
"""

from __future__ import annotations

import json
import mimetypes
import os
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .annotation import AnnotationStore, JudgmentRecord
from .errors import ConflictError, UnknownItemError, ValidationError

DEFAULT_PORT = 8377


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


class AnnotationHandler(BaseHTTPRequestHandler):
    store: AnnotationStore
    ui_dir: Path | None = None

    # Silence per-request logging; the journal is the record.
    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def _send_json(self, status: int, payload: dict | None) -> None:
        body = b"" if payload is None else json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        if body:
            self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self):  # noqa: N802 - stdlib casing
        parsed = urlparse(self.path)
        if parsed.path == "/health":
            self._send_json(200, {"status": "ok"})
            return
        if parsed.path == "/items/next":
            annotator = parse_qs(parsed.query).get("annotator", [""])[0]
            if not annotator:
                self._send_json(400, {"error": "annotator query parameter required"})
                return
            item = self.store.next_item(annotator)
            if item is None:
                self._send_json(204, None)
                return
            payload = item.to_json()
            payload["progress"] = self.store.progress(annotator)
            # Blind judging: the browser never learns which system or
            # dataset produced the candidate.
            payload.pop("system", None)
            payload.pop("dataset", None)
            self._send_json(200, payload)
            return
        if parsed.path == "/report":
            report = self.store.aggregate(allow_partial=True)
            self._send_json(200, report.to_json())
            return
        if parsed.path == "/ui" or parsed.path.startswith("/ui/"):
            self._serve_static(parsed.path)
            return
        self._send_json(404, {"error": f"no such path {parsed.path}"})

    def do_POST(self):  # noqa: N802 - stdlib casing
        parsed = urlparse(self.path)
        if parsed.path != "/judgments":
            self._send_json(404, {"error": f"no such path {parsed.path}"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
            record = JudgmentRecord(
                item_id=str(body["item_id"]),
                annotator_id=str(body["annotator_id"]),
                plausible=bool(body["plausible"]),
                submitted_at=body.get("submitted_at") or _now(),
            )
        except (json.JSONDecodeError, KeyError) as exc:
            self._send_json(400, {"error": f"malformed judgment: {exc}"})
            return
        try:
            ack = self.store.submit_judgment(record)
        except UnknownItemError as exc:
            self._send_json(404, {"error": str(exc)})
            return
        except (ConflictError, ValidationError) as exc:
            self._send_json(409, {"error": str(exc)})
            return
        self._send_json(201, ack)

    def _serve_static(self, path: str) -> None:
        if self.ui_dir is None:
            self._send_json(404, {"error": "no UI assets configured"})
            return
        relative = path[len("/ui") :].lstrip("/") or "index.html"
        target = (self.ui_dir / relative).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            self._send_json(404, {"error": f"no asset {relative}"})
            return
        content = target.read_bytes()
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(content)))
        self.end_headers()
        self.wfile.write(content)


class AnnotationServer:
    """Owns the ThreadingHTTPServer lifecycle around one store."""

    def __init__(
        self,
        store: AnnotationStore,
        port: int | None = None,
        ui_dir: Path | str | None = None,
    ):
        resolved_port = port if port is not None else int(os.environ.get("ANNOTATION_PORT", DEFAULT_PORT))
        handler = type(
            "BoundAnnotationHandler",
            (AnnotationHandler,),
            {"store": store, "ui_dir": Path(ui_dir) if ui_dir else None},
        )
        self.httpd = ThreadingHTTPServer(("127.0.0.1", resolved_port), handler)
        self.port = self.httpd.server_address[1]
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self.httpd.serve_forever()
