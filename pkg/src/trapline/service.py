"""HTTP+JSON service backing the annotation UI.

Endpoints:
    GET    /api/recordings
    GET    /api/recordings/{id}/segments
    GET    /api/recordings/{id}/frames/{n}          (image/jpeg)
    GET    /api/recordings/{id}/suggestions?frame=n
    GET    /api/schema
    PUT    /api/annotations/{annotation_id}
    DELETE /api/annotations/{annotation_id}

Static files from an optional UI directory are served for any non-API path.
Built on the stdlib threading HTTP server: one process, no framework, enough
for a single grader at a time.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .frames import FrameExtractError, VideoFrames
from .ingest import split_recording_id
from .mp4 import Mp4Error
from .store import (
    Annotation,
    AnnotationStore,
    EventSchema,
    SuggestionCache,
    ValidationError,
)

log = logging.getLogger(__name__)

CAPTURE_CADENCE_SECONDS = 5
CAPTURE_START = "07:00:00"


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _annotation_json(ann: Annotation) -> dict:
    return {
        "annotation_id": ann.annotation_id,
        "recording_id": ann.recording_id,
        "start_frame": ann.start_frame,
        "end_frame": ann.end_frame,
        "event": ann.event,
        "animal_id": ann.animal_id,
        "author": ann.author,
        "modified_utc": ann.modified_utc,
        "revision": ann.revision,
    }


class AnnotationService:
    """Request-independent core; the HTTP handler is a thin shell over this."""

    def __init__(
        self,
        store_dir: Path,
        schema: EventSchema,
        videos_dir: Path,
        ui_dir: Path | None = None,
    ):
        self.store = AnnotationStore(store_dir, schema)
        self.suggestions = SuggestionCache(store_dir)
        self.videos_dir = Path(videos_dir)
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._cache_dir = Path(store_dir) / "framecache"
        self._frames: dict[str, VideoFrames] = {}
        self._frames_lock = threading.Lock()

    # -- recordings and frames ------------------------------------------------

    def _video_path(self, recording_id: str) -> Path:
        if not re.match(r"^[A-Za-z0-9._-]+$", recording_id):
            raise ApiError(400, f"bad recording id {recording_id!r}")
        return self.videos_dir / f"{recording_id}.mp4"

    def _reader(self, recording_id: str) -> VideoFrames:
        path = self._video_path(recording_id)
        if not path.exists():
            raise ApiError(404, f"no video for recording {recording_id}")
        with self._frames_lock:
            reader = self._frames.get(recording_id)
            if reader is None:
                try:
                    reader = VideoFrames(path)
                except Mp4Error as exc:
                    raise ApiError(500, str(exc)) from exc
                self._frames[recording_id] = reader
            return reader

    def recordings(self) -> list[dict]:
        ids = {p.stem for p in self.videos_dir.glob("*.mp4")}
        ids.update(self.store.recordings())
        out = []
        for rid in sorted(ids):
            row: dict = {
                "id": rid,
                "capture_cadence_s": CAPTURE_CADENCE_SECONDS,
                "capture_start": CAPTURE_START,
            }
            try:
                burrow, view, date = split_recording_id(rid)
                row.update(burrow=burrow, view=view.value, date=date)
            except ValueError:
                pass
            if self._video_path(rid).exists():
                info = self._reader(rid).info
                row.update(
                    frames=info.frame_count,
                    fps=info.fps,
                    width=info.width,
                    height=info.height,
                )
            out.append(row)
        return out

    def frame_jpeg(self, recording_id: str, index: int) -> bytes:
        reader = self._reader(recording_id)
        if not 0 <= index < reader.info.frame_count:
            raise ApiError(
                404,
                f"frame {index} out of range 0..{reader.info.frame_count - 1}",
            )
        stat = reader.path.stat()
        cache = (
            self._cache_dir
            / recording_id
            / f"{stat.st_size}-{stat.st_mtime_ns}"
            / f"{index}.jpg"
        )
        if cache.exists():
            return cache.read_bytes()
        try:
            data = reader.jpeg(index)
        except FrameExtractError as exc:
            raise ApiError(500, str(exc)) from exc
        cache.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache.with_suffix(".tmp")
        tmp.write_bytes(data)
        tmp.replace(cache)
        return data

    # -- annotations -----------------------------------------------------------

    def segments(self, recording_id: str) -> list[dict]:
        return [_annotation_json(a) for a in self.store.current(recording_id)]

    def put_annotation(self, annotation_id: str, payload: dict) -> dict:
        try:
            ann = Annotation(
                annotation_id=annotation_id,
                recording_id=str(payload["recording_id"]),
                start_frame=int(payload["start_frame"]),
                end_frame=int(payload["end_frame"]),
                event=str(payload.get("event", "") or ""),
                animal_id=payload.get("animal_id") or None,
                author=str(payload.get("author", "") or ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, f"bad annotation body: {exc}") from exc
        try:
            stored = self.store.upsert(ann)
        except ValidationError as exc:
            raise ApiError(400, str(exc)) from exc
        return _annotation_json(stored)

    def delete_annotation(self, annotation_id: str) -> dict:
        try:
            stone = self.store.delete(annotation_id)
        except KeyError:
            raise ApiError(404, f"no annotation {annotation_id}") from None
        return {"deleted": annotation_id, "revision": stone.revision}

    def suggestions_for(self, recording_id: str, frame: int) -> dict:
        available, ranked = self.suggestions.lookup(recording_id, frame)
        return {
            "recording_id": recording_id,
            "frame": frame,
            "available": available,
            "suggestions": [
                {"individual_id": individual, "distance": distance}
                for individual, distance in ranked
            ],
        }

    def schema_json(self) -> dict:
        return {
            "events": [
                {"name": e.name, "id_required": e.id_required}
                for e in self.store.schema.events
            ]
        }


class _Handler(BaseHTTPRequestHandler):
    server_version = "trapline"

    @property
    def service(self) -> AnnotationService:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, fmt: str, *args) -> None:
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload) -> None:
        self._send(status, "application/json", json.dumps(payload).encode())

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            parsed = json.loads(raw or b"{}")
        except json.JSONDecodeError as exc:
            raise ApiError(400, f"bad JSON body: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ApiError(400, "JSON body must be an object")
        return parsed

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_PUT(self) -> None:
        self._dispatch("PUT")

    def do_DELETE(self) -> None:
        self._dispatch("DELETE")

    def _dispatch(self, method: str) -> None:
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts[:1] == ["api"]:
                self._api(method, parts[1:], parse_qs(url.query))
            elif method == "GET":
                self._static(url.path)
            else:
                raise ApiError(404, "not found")
        except ApiError as exc:
            self._send_json(exc.status, {"error": exc.message})
        except Exception:  # never let one request kill the server
            log.exception("unhandled error for %s %s", method, self.path)
            self._send_json(500, {"error": "internal error"})

    def _api(self, method: str, parts: list[str], query: dict) -> None:
        service = self.service
        if method == "GET" and parts == ["recordings"]:
            self._send_json(200, service.recordings())
        elif method == "GET" and len(parts) == 3 and parts[0] == "recordings" and parts[2] == "segments":
            self._send_json(200, service.segments(parts[1]))
        elif method == "GET" and len(parts) == 4 and parts[0] == "recordings" and parts[2] == "frames":
            try:
                index = int(parts[3])
            except ValueError:
                raise ApiError(400, f"bad frame index {parts[3]!r}") from None
            self._send(200, "image/jpeg", service.frame_jpeg(parts[1], index))
        elif method == "GET" and len(parts) == 3 and parts[0] == "recordings" and parts[2] == "suggestions":
            try:
                frame = int(query.get("frame", ["0"])[0])
            except ValueError:
                raise ApiError(400, "bad frame query parameter") from None
            self._send_json(200, service.suggestions_for(parts[1], frame))
        elif method == "GET" and parts == ["schema"]:
            self._send_json(200, service.schema_json())
        elif method == "PUT" and len(parts) == 2 and parts[0] == "annotations":
            self._send_json(200, service.put_annotation(parts[1], self._read_body()))
        elif method == "DELETE" and len(parts) == 2 and parts[0] == "annotations":
            self._send_json(200, service.delete_annotation(parts[1]))
        else:
            raise ApiError(404, f"no such endpoint: {method} /{'/'.join(['api'] + parts)}")

    def _static(self, path: str) -> None:
        ui_dir = self.service.ui_dir
        if ui_dir is None:
            raise ApiError(404, "no UI bundle configured")
        rel = path.lstrip("/") or "index.html"
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            # Unknown paths fall back to the SPA entry point.
            target = ui_dir / "index.html"
            if not target.is_file():
                raise ApiError(404, "not found")
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, content_type, target.read_bytes())


def make_server(service: AnnotationService, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    return server


def serve_forever(service: AnnotationService, host: str, port: int) -> None:
    server = make_server(service, host, port)
    log.info("annotation service on http://%s:%d", *server.server_address[:2])
    # flush so wrappers watching a pipe see the address immediately
    print(
        f"serving on http://{server.server_address[0]}:{server.server_address[1]}",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
