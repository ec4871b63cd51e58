import sys
from pathlib import Path

import numpy as np
import pytest

from trapline.providers import (
    CsvDetectionProvider,
    CsvEmbeddingProvider,
    EMBEDDING_DIM,
    FrameScanError,
    HashEmbeddingProvider,
    ProviderError,
    StubDetectionProvider,
    SubprocessDetectionProvider,
    SubprocessEmbeddingProvider,
    write_detections_csv,
)

STUB_DETECT = [sys.executable, "-m", "trapline.providers", "--mode", "detect"]
STUB_EMBED = [sys.executable, "-m", "trapline.providers", "--mode", "embed"]


class TestStubDetection:
    def test_deterministic_per_name(self):
        stub = StubDetectionProvider()
        a = stub.detect(0, Path("B07-O-20210314-090000.jpg"))
        b = stub.detect(5, Path("B07-O-20210314-090000.jpg"))
        assert a == b

    def test_detections_are_valid(self):
        stub = StubDetectionProvider(positive_rate=1.0)
        for i in range(50):
            for x, y, w, h, conf, label in stub.detect(i, Path(f"img{i}.jpg")):
                assert 0 <= conf <= 1
                assert w > 0 and h > 0
                assert label == "animal"

    def test_positive_rate_roughly_honored(self):
        stub = StubDetectionProvider(positive_rate=0.3)
        hits = sum(
            bool(stub.detect(i, Path(f"img{i:04d}.jpg"))) for i in range(1000)
        )
        assert 200 < hits < 400


class TestCsvDetections:
    def test_round_trip(self, tmp_path):
        rows = {
            0: [(1.0, 2.0, 3.0, 4.0, 0.95, "animal")],
            7: [(0.0, 0.0, 10.0, 10.0, 0.5, "animal"), (5.0, 5.0, 2.0, 2.0, 0.99, "animal")],
        }
        path = tmp_path / "dets.csv"
        write_detections_csv(path, rows)
        provider = CsvDetectionProvider(path)
        assert provider.detect(0, Path("ignored.jpg")) == rows[0]
        assert provider.detect(7, Path("ignored.jpg")) == rows[7]
        assert provider.detect(3, Path("ignored.jpg")) == []

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "dets.csv"
        path.write_text("frame,conf\n0,0.5\n")
        with pytest.raises(ProviderError):
            CsvDetectionProvider(path)

    def test_bad_confidence_rejected(self, tmp_path):
        path = tmp_path / "dets.csv"
        path.write_text(
            "frame_index,x,y,w,h,confidence,label\n0,0,0,5,5,1.5,animal\n"
        )
        with pytest.raises(ProviderError, match="confidence"):
            CsvDetectionProvider(path)


class TestSubprocessDetection:
    def test_protocol_round_trip(self, tmp_path, jpeg_bytes):
        image = tmp_path / "frame.jpg"
        image.write_bytes(jpeg_bytes())
        with SubprocessDetectionProvider(STUB_DETECT) as bridge:
            local = StubDetectionProvider().detect(0, image)
            remote = bridge.detect(0, image)
        assert len(remote) == len(local)
        for a, b in zip(remote, local):
            assert a[:4] == pytest.approx(b[:4], abs=1e-4)
            assert a[4] == pytest.approx(b[4], abs=1e-4)

    def test_missing_binary_aborts_at_start(self):
        with pytest.raises(ProviderError):
            SubprocessDetectionProvider(["/no/such/binary"])

    def test_err_reply_is_per_frame(self):
        with SubprocessDetectionProvider(
            [sys.executable, "-c", "import sys\nfor _ in sys.stdin: print('ERR no model', flush=True)"]
        ) as bridge:
            with pytest.raises(FrameScanError, match="no model"):
                bridge.detect(0, Path("x.jpg"))

    def test_garbage_reply_is_protocol_error(self):
        with SubprocessDetectionProvider(
            [sys.executable, "-c", "import sys\nfor _ in sys.stdin: print('WAT', flush=True)"]
        ) as bridge:
            with pytest.raises(ProviderError):
                bridge.detect(0, Path("x.jpg"))


class TestHashEmbedding:
    def test_shape_and_range(self, tmp_path, jpeg_bytes):
        image = tmp_path / "a.jpg"
        image.write_bytes(jpeg_bytes(tag=1))
        vec = HashEmbeddingProvider().embed_path(image)
        assert vec.shape == (EMBEDDING_DIM,)
        assert np.all((vec >= 0) & (vec < 1))

    def test_deterministic_and_content_sensitive(self, tmp_path, jpeg_bytes):
        a = tmp_path / "a.jpg"
        b = tmp_path / "b.jpg"
        a.write_bytes(jpeg_bytes(tag=1))
        b.write_bytes(jpeg_bytes(tag=2))
        embedder = HashEmbeddingProvider()
        assert np.array_equal(embedder.embed_path(a), embedder.embed_path(a))
        assert not np.array_equal(embedder.embed_path(a), embedder.embed_path(b))

    def test_image_embedding_deterministic(self):
        from PIL import Image

        img = Image.new("RGB", (8, 8), (1, 2, 3))
        embedder = HashEmbeddingProvider()
        assert np.array_equal(embedder.embed_image(img), embedder.embed_image(img))


class TestSubprocessEmbedding:
    def test_protocol_round_trip(self, tmp_path, jpeg_bytes):
        image = tmp_path / "frame.jpg"
        image.write_bytes(jpeg_bytes(tag=3))
        local = HashEmbeddingProvider().embed_path(image)
        with SubprocessEmbeddingProvider(STUB_EMBED) as bridge:
            remote = bridge.embed_path(image)
        assert remote == pytest.approx(local, abs=1e-8)

    def test_short_reply_rejected(self):
        with SubprocessEmbeddingProvider(
            [sys.executable, "-c", "import sys\nfor _ in sys.stdin: print('OK 0.5', flush=True)"]
        ) as bridge:
            with pytest.raises(ProviderError):
                bridge.embed_path(Path("x.jpg"))


class TestCsvEmbeddings:
    def test_lookup_by_name(self, tmp_path):
        header = "image_ref," + ",".join(f"e{i:02d}" for i in range(EMBEDDING_DIM))
        row = "shot.jpg," + ",".join(str(i / 100) for i in range(EMBEDDING_DIM))
        path = tmp_path / "emb.csv"
        path.write_text(f"{header}\n{row}\n")
        provider = CsvEmbeddingProvider(path)
        vec = provider.embed_path(Path("/any/dir/shot.jpg"))
        assert vec[3] == pytest.approx(0.03)
        with pytest.raises(FrameScanError):
            provider.embed_path(Path("unknown.jpg"))
