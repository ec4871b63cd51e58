"""Animal re-identification: mugshot canonicalization and top-k retrieval.

Orientation comes from the mask's central second moments; identity from
nearest-neighbor distance against a reference library of 32-d embeddings.
A query runs in both the given and the 180-degree-rotated orientation and
each individual is scored by its minimum distance over both.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .providers import EMBEDDING_DIM, EmbeddingProvider
from .segmenter import Segment

MUGSHOT_SIZE = 299
# Below this major/minor axis ratio the orientation is meaningless noise.
NEAR_CIRCULAR_RATIO = 1.05
DEFAULT_CROP_MARGIN = 0.05
DEFAULT_TOP_K = 5
DEFAULT_FRAMES_PER_SEGMENT = 5

Prediction = list[tuple[str, float]]


class EmptyMaskError(ValueError):
    pass


class LibraryError(ValueError):
    pass


@dataclass
class Mask:
    """Binary animal-pixel raster from a mask provider."""

    bitmap: np.ndarray  # bool array, shape (height, width)

    def __post_init__(self) -> None:
        self.bitmap = np.asarray(self.bitmap, dtype=bool)
        if self.bitmap.ndim != 2:
            raise ValueError(f"mask must be 2-d, got shape {self.bitmap.shape}")

    @property
    def height(self) -> int:
        return self.bitmap.shape[0]

    @property
    def width(self) -> int:
        return self.bitmap.shape[1]


@dataclass
class Mugshot:
    """Square canonical crop of one animal, major axis vertical."""

    image: "object"  # PIL.Image.Image, MUGSHOT_SIZE x MUGSHOT_SIZE
    source: tuple[str, int, int] | None = None  # (recording, frame, detection ordinal)
    applied_rotation: float = 0.0

    def __post_init__(self) -> None:
        if self.image.size != (MUGSHOT_SIZE, MUGSHOT_SIZE):
            raise ValueError(
                f"mugshot must be {MUGSHOT_SIZE}x{MUGSHOT_SIZE}, got {self.image.size}"
            )


def _central_moments(bitmap: np.ndarray) -> tuple[float, float, float]:
    """(mu20, mu11, mu02) of the true pixels, in y-up coordinates so angles
    read counterclockwise from horizontal as displayed."""
    ys, xs = np.nonzero(bitmap)
    if xs.size == 0:
        raise EmptyMaskError("mask has no true pixels")
    x = xs.astype(np.float64)
    y = -ys.astype(np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    return float((dx * dx).mean()), float((dx * dy).mean()), float((dy * dy).mean())


def _axis_ratio(mu20: float, mu11: float, mu02: float) -> float:
    half_trace = 0.5 * (mu20 + mu02)
    spread = math.hypot(0.5 * (mu20 - mu02), mu11)
    minor = half_trace - spread
    if minor <= 1e-12:
        return math.inf
    return math.sqrt((half_trace + spread) / minor)


def fold_half_turn(degrees: float) -> float:
    """Fold an angle into (-90, 90]; an axis is the same thing turned 180."""
    folded = degrees % 180.0
    if folded > 90.0:
        folded -= 180.0
    return folded


def mask_orientation(mask: Mask) -> float:
    """Rotation in degrees (counterclockwise, in (-90, 90]) that makes the
    mask's major axis vertical. Near-circular masks return 0 by convention."""
    mu20, mu11, mu02 = _central_moments(mask.bitmap)
    if _axis_ratio(mu20, mu11, mu02) < NEAR_CIRCULAR_RATIO:
        return 0.0
    theta = math.degrees(0.5 * math.atan2(2.0 * mu11, mu20 - mu02))
    return fold_half_turn(90.0 - theta)


def rotate_half_turn(image):
    from PIL import Image

    return image.transpose(Image.Transpose.ROTATE_180)


def canonicalize_mugshot(
    image,
    mask: Mask,
    source: tuple[str, int, int] | None = None,
    margin: float = DEFAULT_CROP_MARGIN,
) -> Mugshot:
    """Rotate so the animal's major axis is vertical, crop the mask's bounding
    box plus a margin, then letterbox to the mugshot size."""
    from PIL import Image

    if (image.height, image.width) != mask.bitmap.shape:
        raise ValueError(
            f"mask {mask.bitmap.shape} not aligned to image {image.height, image.width}"
        )
    rotation = mask_orientation(mask)  # raises EmptyMaskError on empty masks

    rotated = image.convert("RGB").rotate(
        rotation, resample=Image.Resampling.BICUBIC, expand=True, fillcolor=(0, 0, 0)
    )
    mask_img = Image.fromarray(mask.bitmap.astype(np.uint8) * 255, mode="L")
    rotated_mask = np.asarray(
        mask_img.rotate(rotation, resample=Image.Resampling.NEAREST, expand=True)
    )

    ys, xs = np.nonzero(rotated_mask)
    if xs.size == 0:
        raise EmptyMaskError("mask vanished during rotation")
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    pad_x = math.ceil((x1 - x0 + 1) * margin)
    pad_y = math.ceil((y1 - y0 + 1) * margin)
    left = max(0, x0 - pad_x)
    top = max(0, y0 - pad_y)
    right = min(rotated.width, x1 + 1 + pad_x)
    bottom = min(rotated.height, y1 + 1 + pad_y)
    crop = rotated.crop((left, top, right, bottom))

    scale = MUGSHOT_SIZE / max(crop.width, crop.height)
    new_w = max(1, round(crop.width * scale))
    new_h = max(1, round(crop.height * scale))
    thumb = crop.resize((new_w, new_h), Image.Resampling.LANCZOS)
    canvas = Image.new("RGB", (MUGSHOT_SIZE, MUGSHOT_SIZE), (0, 0, 0))
    canvas.paste(thumb, ((MUGSHOT_SIZE - new_w) // 2, (MUGSHOT_SIZE - new_h) // 2))
    return Mugshot(canvas, source, rotation)


@dataclass(frozen=True)
class LibraryEntry:
    individual_id: str
    image_ref: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.shape != (EMBEDDING_DIM,):
            raise LibraryError(f"embedding must have {EMBEDDING_DIM} dims, got {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise LibraryError("embedding has non-finite components")
        object.__setattr__(self, "vector", vec)


class ReferenceLibrary:
    """Labeled gallery of identity embeddings, immutable during queries."""

    def __init__(self, entries: Iterable[LibraryEntry]):
        self.entries: list[LibraryEntry] = list(entries)
        if not self.entries:
            raise LibraryError("reference library is empty")
        self._by_id: dict[str, list[LibraryEntry]] = {}
        for entry in self.entries:
            self._by_id.setdefault(entry.individual_id, []).append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def individuals(self) -> list[str]:
        return sorted(self._by_id)

    def entries_for(self, individual_id: str) -> list[LibraryEntry]:
        return list(self._by_id[individual_id])

    def matrix(self) -> tuple[np.ndarray, list[str]]:
        return np.stack([e.vector for e in self.entries]), [
            e.individual_id for e in self.entries
        ]

    HEADER = ["individual_id", "image_ref"] + [f"e{i:02d}" for i in range(EMBEDDING_DIM)]

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.HEADER)
            for e in self.entries:
                writer.writerow(
                    [e.individual_id, e.image_ref] + [repr(float(v)) for v in e.vector]
                )

    @classmethod
    def from_csv(cls, path: Path) -> "ReferenceLibrary":
        entries = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != cls.HEADER:
                raise LibraryError(f"{path}: bad library header")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(cls.HEADER):
                    raise LibraryError(f"{path}:{lineno}: wrong field count")
                try:
                    vec = np.array([float(v) for v in row[2:]])
                except ValueError:
                    raise LibraryError(f"{path}:{lineno}: bad component") from None
                entries.append(LibraryEntry(row[0], row[1], vec))
        return cls(entries)


def embedding_distances(matrix: np.ndarray, query: np.ndarray, metric: str = "l2") -> np.ndarray:
    """Distance from one query vector to every row of the gallery matrix."""
    if metric == "l2":
        return np.sqrt(((matrix - query) ** 2).sum(axis=1))
    if metric == "cosine":
        norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
        with np.errstate(invalid="ignore", divide="ignore"):
            sims = np.where(norms > 0, matrix @ query / norms, 0.0)
        return 1.0 - sims
    raise ValueError(f"unknown metric {metric!r}")


def rank_individuals(
    library: ReferenceLibrary,
    query_vectors: Sequence[np.ndarray],
    k: int = DEFAULT_TOP_K,
    metric: str = "l2",
) -> Prediction:
    """Rank individuals by their best distance over all library embeddings and
    all query vectors. Ties break on individual id, so rankings are stable."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query_vectors:
        raise ValueError("no query vectors")
    matrix, ids = library.matrix()
    per_entry = np.min(
        np.stack([embedding_distances(matrix, q, metric) for q in query_vectors]),
        axis=0,
    )
    best: dict[str, float] = {}
    for individual, dist in zip(ids, per_entry):
        if individual not in best or dist < best[individual]:
            best[individual] = float(dist)
    ranked = sorted(best.items(), key=lambda item: (item[1], item[0]))
    return ranked[:k]


def query_topk(
    library: ReferenceLibrary,
    query: Mugshot,
    embedder: EmbeddingProvider,
    k: int = DEFAULT_TOP_K,
    metric: str = "l2",
) -> Prediction:
    """Top-k identities for a mugshot, trying both vertical orientations."""
    upright = embedder.embed_image(query.image)
    flipped = embedder.embed_image(rotate_half_turn(query.image))
    return rank_individuals(library, [upright, flipped], k, metric)


def _top1_labels(
    distance_table: np.ndarray, ids: list[str], alive: np.ndarray
) -> list[str]:
    """Best-scoring individual per validation row, over alive columns only."""
    alive_idx = np.flatnonzero(alive)
    labels = []
    for row in distance_table:
        d = row[alive_idx]
        m = d.min()
        tied = alive_idx[d == m]
        labels.append(min(ids[i] for i in tied))
    return labels


def prune_library(
    library: ReferenceLibrary,
    validation: Sequence[tuple[str, np.ndarray]],
    seed: int = 0,
    metric: str = "l2",
) -> ReferenceLibrary:
    """Shrink the library by randomized removal of embeddings whose absence
    does not lower top-1 validation accuracy.

    Runs full passes until a fixed point: one randomized pass can leave
    removable redundancy behind. Every individual keeps at least one
    embedding, and accuracy never decreases over an accepted removal.
    """
    if not validation:
        raise LibraryError("validation set is empty")
    known = set(library._by_id)
    missing = {label for label, _ in validation} - known
    if missing:
        raise LibraryError(f"validation labels not in library: {sorted(missing)}")

    matrix, ids = library.matrix()
    table = np.stack(
        [embedding_distances(matrix, np.asarray(vec, dtype=np.float64), metric) for _, vec in validation]
    )
    truth = [label for label, _ in validation]
    alive = np.ones(len(library), dtype=bool)
    id_counts = {i: ids.count(i) for i in set(ids)}

    def accuracy() -> float:
        predicted = _top1_labels(table, ids, alive)
        return sum(p == t for p, t in zip(predicted, truth)) / len(truth)

    rng = random.Random(seed)
    current = accuracy()
    while True:
        removed_any = False
        order = [i for i in range(len(ids)) if alive[i]]
        rng.shuffle(order)
        for i in order:
            if id_counts[ids[i]] <= 1:
                continue
            alive[i] = False
            candidate = accuracy()
            if candidate >= current:
                current = candidate
                id_counts[ids[i]] -= 1
                removed_any = True
            else:
                alive[i] = True
        if not removed_any:
            break
    return ReferenceLibrary(
        [entry for entry, keep in zip(library.entries, alive) if keep]
    )


def sample_segment_frames(segment: Segment, n: int = DEFAULT_FRAMES_PER_SEGMENT) -> list[int]:
    """n frame indices evenly spread across the segment, endpoints included."""
    if n < 1:
        raise ValueError("n must be >= 1")
    start, end = segment.start_frame, segment.end_frame
    length = end - start + 1
    if length <= n:
        return list(range(start, end + 1))
    if n == 1:
        return [(start + end) // 2]
    return [start + (i * (length - 1)) // (n - 1) for i in range(n)]
