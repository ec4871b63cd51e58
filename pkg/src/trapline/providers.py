"""Pluggable ML inference backends for detection and embedding.

Three provider styles ship for each task: a precomputed-CSV reader, a
line-protocol subprocess bridge (so any external ML runtime can serve a
model), and a deterministic synthetic stub for tests and dry runs.

Subprocess protocols, one request per line:
    DETECT <image path>   ->  OK <n>            then n lines: x y w h confidence label
    EMBED <image path>    ->  OK e00 ... e31
either may answer: ERR <message>

Running ``python -m trapline.providers --mode detect|embed`` serves the
protocol over the synthetic stubs, which is handy for wiring tests.
"""

from __future__ import annotations

import csv
import hashlib
import random
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

EMBEDDING_DIM = 32

# Raw detection tuple: x, y, w, h, confidence, label
RawDetection = tuple[float, float, float, float, float, str]


class ProviderError(RuntimeError):
    """Provider could not start or broke its protocol."""


class FrameScanError(RuntimeError):
    """Provider failed on a single frame; the frame stays unscanned."""


class DetectionProvider(Protocol):
    def detect(self, frame_index: int, path: Path) -> list[RawDetection]: ...


class EmbeddingProvider(Protocol):
    def embed_path(self, path: Path) -> np.ndarray: ...

    def embed_image(self, image) -> np.ndarray: ...


def _parse_detection_fields(fields: Sequence[str]) -> RawDetection:
    if len(fields) != 6:
        raise ValueError(f"expected 6 detection fields, got {len(fields)}")
    x, y, w, h, conf = (float(v) for v in fields[:5])
    label = fields[5]
    if not 0.0 <= conf <= 1.0:
        raise ValueError(f"confidence {conf} outside [0, 1]")
    if w <= 0 or h <= 0:
        raise ValueError(f"non-positive box {w}x{h}")
    return (x, y, w, h, conf, label)


class CsvDetectionProvider:
    """Reads detections precomputed for a recording.

    CSV header: frame_index,x,y,w,h,confidence,label
    """

    HEADER = ["frame_index", "x", "y", "w", "h", "confidence", "label"]

    def __init__(self, path: Path):
        self._by_frame: dict[int, list[RawDetection]] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != self.HEADER:
                raise ProviderError(f"{path}: bad detections header {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    idx = int(row[0])
                    det = _parse_detection_fields(row[1:])
                except ValueError as exc:
                    raise ProviderError(f"{path}:{lineno}: {exc}") from None
                self._by_frame.setdefault(idx, []).append(det)

    def detect(self, frame_index: int, path: Path) -> list[RawDetection]:
        return list(self._by_frame.get(frame_index, []))


def write_detections_csv(path: Path, rows: dict[int, list[RawDetection]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CsvDetectionProvider.HEADER)
        for idx in sorted(rows):
            for x, y, w, h, conf, label in rows[idx]:
                writer.writerow([idx, f"{x:g}", f"{y:g}", f"{w:g}", f"{h:g}", f"{conf:g}", label])


class StubDetectionProvider:
    """Deterministic synthetic detector: detections depend only on the file
    name, so reruns and parallel runs agree."""

    def __init__(self, positive_rate: float = 0.3, label: str = "animal", seed: int = 0):
        self.positive_rate = positive_rate
        self.label = label
        self.seed = seed

    def detect(self, frame_index: int, path: Path) -> list[RawDetection]:
        digest = hashlib.sha256(f"{self.seed}:{path.name}".encode()).digest()
        rng = random.Random(digest)
        if rng.random() >= self.positive_rate:
            return []
        n = 1 + (digest[0] % 2)
        out = []
        for _ in range(n):
            w = rng.uniform(40, 400)
            h = rng.uniform(40, 400)
            out.append(
                (
                    rng.uniform(0, 2048 - w),
                    rng.uniform(0, 1536 - h),
                    w,
                    h,
                    rng.uniform(0.5, 1.0),
                    self.label,
                )
            )
        return out


class _LineProtocolClient:
    """Shared plumbing for the subprocess bridges."""

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProviderError(f"cannot start provider {self.argv!r}: {exc}") from exc

    def request(self, line: str) -> str:
        proc = self._proc
        if proc.poll() is not None:
            raise ProviderError(f"provider {self.argv!r} exited early")
        assert proc.stdin and proc.stdout
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ProviderError(f"provider {self.argv!r} pipe broke: {exc}") from exc
        if not reply:
            raise ProviderError(f"provider {self.argv!r} closed its output")
        return reply.rstrip("\n")

    def read_line(self) -> str:
        assert self._proc.stdout
        line = self._proc.stdout.readline()
        if not line:
            raise ProviderError(f"provider {self.argv!r} closed mid-response")
        return line.rstrip("\n")

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            if proc.stdin:
                try:
                    proc.stdin.close()
                except OSError:
                    pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class SubprocessDetectionProvider(_LineProtocolClient):
    def detect(self, frame_index: int, path: Path) -> list[RawDetection]:
        reply = self.request(f"DETECT {path}")
        parts = reply.split()
        if parts and parts[0] == "ERR":
            raise FrameScanError(reply[4:].strip() or "provider error")
        if len(parts) != 2 or parts[0] != "OK":
            raise ProviderError(f"bad DETECT reply: {reply!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise ProviderError(f"bad DETECT count: {reply!r}") from None
        detections = []
        for _ in range(count):
            fields = self.read_line().split()
            try:
                detections.append(_parse_detection_fields(fields))
            except ValueError as exc:
                raise ProviderError(f"bad detection line: {exc}") from None
        return detections


class SubprocessEmbeddingProvider(_LineProtocolClient):
    def embed_path(self, path: Path) -> np.ndarray:
        reply = self.request(f"EMBED {path}")
        parts = reply.split()
        if parts and parts[0] == "ERR":
            raise FrameScanError(reply[4:].strip() or "provider error")
        if len(parts) != 1 + EMBEDDING_DIM or parts[0] != "OK":
            raise ProviderError(f"bad EMBED reply: {reply!r}")
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError:
            raise ProviderError(f"bad EMBED component in {reply!r}") from None
        if not np.all(np.isfinite(vec)):
            raise ProviderError("non-finite embedding component")
        return vec

    def embed_image(self, image) -> np.ndarray:
        with tempfile.NamedTemporaryFile(suffix=".jpg", delete=True) as tmp:
            image.save(tmp.name, "JPEG", quality=95)
            return self.embed_path(Path(tmp.name))


def _hash_to_vector(data: bytes) -> np.ndarray:
    # Stretch one SHA-256 into 32 floats in [0, 1): 8 hash rounds of 4 values.
    values: list[float] = []
    counter = 0
    while len(values) < EMBEDDING_DIM:
        digest = hashlib.sha256(data + counter.to_bytes(4, "big")).digest()
        for i in range(0, 32, 8):
            chunk = int.from_bytes(digest[i : i + 8], "big")
            values.append(chunk / 2**64)
        counter += 1
    return np.array(values[:EMBEDDING_DIM], dtype=np.float64)


class HashEmbeddingProvider:
    """Synthetic embedder: hash of the image bytes stretched to 32 dims."""

    def embed_path(self, path: Path) -> np.ndarray:
        return _hash_to_vector(Path(path).read_bytes())

    def embed_image(self, image) -> np.ndarray:
        raw = image.tobytes() + f"{image.mode}:{image.size}".encode()
        return _hash_to_vector(raw)


class CsvEmbeddingProvider:
    """Reads precomputed embeddings keyed by image file name.

    CSV header: image_ref,e00,...,e31
    """

    def __init__(self, path: Path):
        self._by_ref: dict[str, np.ndarray] = {}
        expected = ["image_ref"] + [f"e{i:02d}" for i in range(EMBEDDING_DIM)]
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != expected:
                raise ProviderError(f"{path}: bad embeddings header")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 1 + EMBEDDING_DIM:
                    raise ProviderError(f"{path}:{lineno}: wrong field count")
                try:
                    self._by_ref[row[0]] = np.array([float(v) for v in row[1:]])
                except ValueError:
                    raise ProviderError(f"{path}:{lineno}: bad component") from None

    def embed_path(self, path: Path) -> np.ndarray:
        ref = Path(path).name
        try:
            return self._by_ref[ref]
        except KeyError:
            raise FrameScanError(f"no precomputed embedding for {ref}") from None

    def embed_image(self, image) -> np.ndarray:
        raise FrameScanError("CSV embedding provider cannot embed in-memory images")


def _serve_protocol(mode: str) -> int:
    """Serve the line protocol over the synthetic stubs (stdin/stdout)."""
    detector = StubDetectionProvider()
    embedder = HashEmbeddingProvider()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        verb, _, arg = line.partition(" ")
        try:
            if verb == "DETECT" and mode == "detect":
                dets = detector.detect(0, Path(arg))
                print(f"OK {len(dets)}")
                for x, y, w, h, conf, label in dets:
                    print(f"{x!r} {y!r} {w!r} {h!r} {conf!r} {label}")
            elif verb == "EMBED" and mode == "embed":
                vec = embedder.embed_path(Path(arg))
                print("OK " + " ".join(f"{v:.9f}" for v in vec))
            else:
                print(f"ERR unsupported request {verb}")
        except Exception as exc:
            print(f"ERR {exc}")
        sys.stdout.flush()
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Serve the stub provider protocol.")
    parser.add_argument("--mode", choices=["detect", "embed"], required=True)
    args = parser.parse_args(argv)
    return _serve_protocol(args.mode)


if __name__ == "__main__":
    sys.exit(main())
