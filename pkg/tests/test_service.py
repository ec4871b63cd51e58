import io
import json
import threading
import urllib.error
import urllib.request

import pytest
from PIL import Image

from trapline.mjpeg import mux_mjpeg
from trapline.service import AnnotationService, make_server
from trapline.store import SuggestionCache, SuggestionRow, parse_event_schema

RID = "B07-O-20210314"


def jpeg(color):
    img = Image.new("RGB", (48, 36), color)
    buf = io.BytesIO()
    img.save(buf, "JPEG")
    return buf.getvalue()


@pytest.fixture
def service_url(tmp_path):
    videos = tmp_path / "videos"
    videos.mkdir()
    frames = [jpeg((i * 25 % 255, 90, 30)) for i in range(8)]
    mux_mjpeg(frames, 30.0, videos / f"{RID}.mp4", 48, 36)

    schema = parse_event_schema("event basking\nevent mating id-required\n")
    service = AnnotationService(tmp_path / "store", schema, videos)
    SuggestionCache(tmp_path / "store").write(
        RID,
        [
            SuggestionRow(RID, 2, 6, 4, r, f"T{r:02d}", r / 10)
            for r in range(1, 6)
        ],
    )
    server = make_server(service)
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.02), daemon=True
    )
    thread.start()
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}", frames
    server.shutdown()
    server.server_close()


def request(url, method="GET", payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req) as resp:
        body = resp.read()
        ctype = resp.headers.get("Content-Type", "")
        return resp.status, ctype, body


def request_json(url, method="GET", payload=None):
    status, _, body = request(url, method, payload)
    return status, json.loads(body)


def http_error(url, method="GET", payload=None):
    try:
        request(url, method, payload)
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())
    raise AssertionError("expected an HTTP error")


class TestRecordingsAndFrames:
    def test_recordings_listing(self, service_url):
        base, _ = service_url
        status, listing = request_json(f"{base}/api/recordings")
        assert status == 200
        (row,) = listing
        assert row["id"] == RID
        assert row["frames"] == 8
        assert row["fps"] == 30.0
        assert (row["width"], row["height"]) == (48, 36)
        assert row["capture_cadence_s"] == 5
        assert row["burrow"] == "B07" and row["date"] == "20210314"

    def test_frame_bytes_stable_and_correct(self, service_url):
        base, frames = service_url
        status, ctype, body = request(f"{base}/api/recordings/{RID}/frames/3")
        assert status == 200
        assert ctype == "image/jpeg"
        assert body == frames[3]
        _, _, again = request(f"{base}/api/recordings/{RID}/frames/3")
        assert again == body

    def test_frame_out_of_range(self, service_url):
        base, _ = service_url
        code, payload = http_error(f"{base}/api/recordings/{RID}/frames/8")
        assert code == 404
        assert "range" in payload["error"]

    def test_missing_video(self, service_url):
        base, _ = service_url
        code, _ = http_error(f"{base}/api/recordings/NOPE-O-20210101/frames/0")
        assert code == 404


class TestAnnotationApi:
    def put_body(self, **kw):
        body = {
            "recording_id": RID,
            "start_frame": 2,
            "end_frame": 5,
            "event": "basking",
            "animal_id": None,
            "author": "grader1",
        }
        body.update(kw)
        return body

    def test_put_then_list_segments(self, service_url):
        base, _ = service_url
        status, stored = request_json(
            f"{base}/api/annotations/web-1", "PUT", self.put_body()
        )
        assert status == 200
        assert stored["revision"] == 1
        status, segments = request_json(f"{base}/api/recordings/{RID}/segments")
        assert [s["annotation_id"] for s in segments] == ["web-1"]

    def test_edit_bumps_revision(self, service_url):
        base, _ = service_url
        request_json(f"{base}/api/annotations/web-2", "PUT", self.put_body())
        _, second = request_json(
            f"{base}/api/annotations/web-2", "PUT", self.put_body(end_frame=7)
        )
        assert second["revision"] == 2
        assert second["end_frame"] == 7

    def test_validation_errors_are_400(self, service_url):
        base, _ = service_url
        code, payload = http_error(
            f"{base}/api/annotations/web-3", "PUT", self.put_body(event="mating")
        )
        assert code == 400
        assert "animal id" in payload["error"]
        code, _ = http_error(
            f"{base}/api/annotations/web-4", "PUT", self.put_body(start_frame=9, end_frame=1)
        )
        assert code == 400

    def test_delete(self, service_url):
        base, _ = service_url
        request_json(f"{base}/api/annotations/web-5", "PUT", self.put_body())
        status, gone = request_json(f"{base}/api/annotations/web-5", "DELETE")
        assert status == 200 and gone["deleted"] == "web-5"
        _, segments = request_json(f"{base}/api/recordings/{RID}/segments")
        assert all(s["annotation_id"] != "web-5" for s in segments)
        code, _ = http_error(f"{base}/api/annotations/web-5", "DELETE")
        assert code == 404


class TestSuggestionsAndSchema:
    def test_schema_endpoint(self, service_url):
        base, _ = service_url
        _, payload = request_json(f"{base}/api/schema")
        assert payload == {
            "events": [
                {"name": "basking", "id_required": False},
                {"name": "mating", "id_required": True},
            ]
        }

    def test_suggestions_inside_segment(self, service_url):
        base, _ = service_url
        _, payload = request_json(f"{base}/api/recordings/{RID}/suggestions?frame=4")
        assert payload["available"] is True
        assert len(payload["suggestions"]) == 5
        assert payload["suggestions"][0] == {"individual_id": "T01", "distance": 0.1}

    def test_suggestions_outside_segment(self, service_url):
        base, _ = service_url
        _, payload = request_json(f"{base}/api/recordings/{RID}/suggestions?frame=0")
        assert payload["available"] is True
        assert payload["suggestions"] == []

    def test_suggestions_unprocessed_recording(self, service_url):
        base, _ = service_url
        _, payload = request_json(
            f"{base}/api/recordings/OTHER-O-20210101/suggestions?frame=0"
        )
        assert payload["available"] is False


class TestCors:
    def test_preflight(self, service_url):
        base, _ = service_url
        req = urllib.request.Request(f"{base}/api/schema", method="OPTIONS")
        with urllib.request.urlopen(req) as resp:
            assert resp.status == 204
            assert resp.headers["Access-Control-Allow-Origin"] == "*"
            assert "PUT" in resp.headers["Access-Control-Allow-Methods"]

    def test_get_carries_cors_header(self, service_url):
        base, _ = service_url
        req = urllib.request.Request(f"{base}/api/schema")
        with urllib.request.urlopen(req) as resp:
            assert resp.headers["Access-Control-Allow-Origin"] == "*"


class TestStaticUi:
    def test_serves_ui_bundle(self, tmp_path):
        videos = tmp_path / "videos"
        videos.mkdir()
        ui = tmp_path / "ui"
        (ui / "assets").mkdir(parents=True)
        (ui / "index.html").write_text("<html>trapline</html>")
        (ui / "assets" / "app.js").write_text("console.log('hi')")
        service = AnnotationService(
            tmp_path / "store", parse_event_schema(""), videos, ui_dir=ui
        )
        server = make_server(service)
        thread = threading.Thread(
            target=lambda: server.serve_forever(poll_interval=0.02), daemon=True
        )
        thread.start()
        try:
            base = f"http://{server.server_address[0]}:{server.server_address[1]}"
            status, ctype, body = request(f"{base}/")
            assert status == 200 and b"trapline" in body
            status, ctype, body = request(f"{base}/assets/app.js")
            assert status == 200 and "javascript" in ctype
            # unknown path falls back to the SPA entry
            status, _, body = request(f"{base}/recordings/B07")
            assert status == 200 and b"trapline" in body
        finally:
            server.shutdown()
            server.server_close()
