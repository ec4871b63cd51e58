"""Package archived camera-day images into MP4 videos via an external encoder.

Frame index is defined by position in the timestamp-sorted plan, not by
timestamp arithmetic, so dropped captures never shift downstream indexing.
"""

from __future__ import annotations

import logging
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

from . import mp4
from .ingest import parse_canonical_name, recording_id, split_recording_id

log = logging.getLogger(__name__)

DEFAULT_FPS = 30.0
# Half the 5 s capture cadence: pairs drifted by less than one slot still match.
DEFAULT_ALIGN_TOLERANCE = 2.5


class EncodeError(RuntimeError):
    """External encoder failed or broke the N-images-in, N-frames-out contract."""


@dataclass(frozen=True)
class FrameRef:
    timestamp: datetime
    path: Path


@dataclass
class EncodePlan:
    """All frames of one camera-day, in capture order."""

    recording_id: str
    frames: list[FrameRef] = field(default_factory=list)
    fps: float = DEFAULT_FPS

    def __post_init__(self) -> None:
        for prev, cur in zip(self.frames, self.frames[1:]):
            if cur.timestamp <= prev.timestamp:
                raise ValueError(
                    f"{self.recording_id}: frame timestamps not strictly increasing "
                    f"({prev.timestamp} then {cur.timestamp})"
                )

    def __len__(self) -> int:
        return len(self.frames)


# (output index, overhead source index or None, front source index or None);
# None is the FILLER marker.
AlignmentRow = tuple[int, Optional[int], Optional[int]]


@dataclass
class VideoAsset:
    path: Path
    frame_count: int
    fps: float
    duration: float
    width: int
    height: int


def plan_day(archive: Path, rid: str, fps: float = DEFAULT_FPS) -> EncodePlan:
    """List one recording's images in timestamp order. Empty day, empty plan."""
    burrow, view, date = split_recording_id(rid)
    day_dir = archive / burrow / view.value / date
    frames: list[FrameRef] = []
    if day_dir.is_dir():
        seen: set[datetime] = set()
        for entry in sorted(day_dir.iterdir()):
            if not entry.is_file():
                continue
            try:
                meta = parse_canonical_name(entry.name)
            except ValueError:
                log.warning("%s: skipping non-canonical file name", entry)
                continue
            if recording_id(meta) != rid:
                log.warning("%s: file belongs to %s, not %s", entry, recording_id(meta), rid)
                continue
            if meta.timestamp in seen:
                log.warning("%s: duplicate capture timestamp, skipping", entry)
                continue
            seen.add(meta.timestamp)
            frames.append(FrameRef(meta.timestamp, entry))
    frames.sort(key=lambda f: f.timestamp)
    return EncodePlan(rid, frames, fps)


def align_streams(
    overhead: EncodePlan,
    front: EncodePlan,
    tolerance: float = DEFAULT_ALIGN_TOLERANCE,
) -> list[AlignmentRow]:
    """Greedy two-pointer merge of two camera streams by timestamp.

    Frames within `tolerance` seconds pair up; unmatched frames pair with
    FILLER (None). Linear time, adequate at the 5 s capture cadence.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    rows: list[AlignmentRow] = []
    i = j = 0
    o_frames, f_frames = overhead.frames, front.frames
    while i < len(o_frames) and j < len(f_frames):
        delta = (o_frames[i].timestamp - f_frames[j].timestamp).total_seconds()
        if abs(delta) <= tolerance:
            rows.append((len(rows), i, j))
            i += 1
            j += 1
        elif delta < 0:
            rows.append((len(rows), i, None))
            i += 1
        else:
            rows.append((len(rows), None, j))
            j += 1
    for k in range(i, len(o_frames)):
        rows.append((len(rows), k, None))
    for k in range(j, len(f_frames)):
        rows.append((len(rows), None, k))
    return rows


@dataclass
class EncoderConfig:
    """External encoder invocation. argv entries may use the placeholders
    {list} (frame-list file), {fps}, {out} and {nframes}; mode "pipe" feeds
    concatenated JPEG bytes on stdin instead of a list file."""

    name: str
    argv: list[str]
    mode: str = "list"


def builtin_encoder() -> EncoderConfig:
    return EncoderConfig(
        name="builtin-mjpeg",
        argv=[
            sys.executable,
            "-m",
            "trapline.mjpeg",
            "--list",
            "{list}",
            "--fps",
            "{fps}",
            "--out",
            "{out}",
        ],
        mode="list",
    )


def ffmpeg_encoder(binary: str = "ffmpeg", extra_args: Sequence[str] = ()) -> EncoderConfig:
    argv = [
        binary,
        "-hide_banner",
        "-loglevel",
        "error",
        "-y",
        "-f",
        "image2pipe",
        "-framerate",
        "{fps}",
        "-i",
        "-",
        "-frames:v",
        "{nframes}",
        "-c:v",
        "libx264",
        "-pix_fmt",
        "yuv420p",
        *extra_args,
        "{out}",
    ]
    return EncoderConfig(name=binary, argv=argv, mode="pipe")


def default_encoder() -> EncoderConfig:
    """ffmpeg when installed, otherwise the bundled MJPEG muxer."""
    if shutil.which("ffmpeg"):
        return ffmpeg_encoder()
    return builtin_encoder()


def resolve_encoder(name: str, extra_args: Sequence[str] = ()) -> EncoderConfig:
    if name in ("", "auto"):
        return default_encoder()
    if name in ("builtin", "mjpeg", "builtin-mjpeg"):
        return builtin_encoder()
    return ffmpeg_encoder(name, extra_args)


def _fmt_fps(fps: float) -> str:
    return f"{fps:g}"


def run_encoder(
    frame_paths: Sequence[Path], fps: float, out: Path, encoder: EncoderConfig
) -> None:
    """Invoke the encoder subprocess on an explicit frame sequence."""
    out.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="trapline-enc-") as tmp:
        subs = {
            "fps": _fmt_fps(fps),
            "out": str(out),
            "nframes": str(len(frame_paths)),
        }
        stdin_data = None
        if encoder.mode == "list":
            list_file = Path(tmp) / "frames.txt"
            list_file.write_text("".join(f"{p.resolve()}\n" for p in frame_paths))
            subs["list"] = str(list_file)
        else:
            stdin_data = b"".join(p.read_bytes() for p in frame_paths)
        argv = [a.format_map(subs) for a in encoder.argv]
        try:
            proc = subprocess.run(
                argv,
                input=stdin_data,
                capture_output=True,
                check=False,
            )
        except OSError as exc:
            raise EncodeError(f"cannot run encoder {encoder.name}: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode("utf-8", "replace").strip()[-2000:]
            raise EncodeError(f"encoder {encoder.name} failed ({proc.returncode}): {tail}")
    if not out.exists():
        raise EncodeError(f"encoder {encoder.name} produced no output at {out}")


def encode_day(
    plan: EncodePlan, out: Path, encoder: EncoderConfig | None = None
) -> VideoAsset | None:
    """Encode one camera-day. Verifies the output frame count with an
    independent container probe. Empty plan returns None and writes nothing."""
    if not plan.frames:
        log.info("%s: empty day, nothing to encode", plan.recording_id)
        return None
    encoder = encoder or default_encoder()
    run_encoder([f.path for f in plan.frames], plan.fps, out, encoder)
    info = mp4.probe_mp4(out)
    if info.frame_count != len(plan.frames):
        raise EncodeError(
            f"{out}: encoder wrote {info.frame_count} frames, plan has {len(plan.frames)}"
        )
    return VideoAsset(
        path=out,
        frame_count=info.frame_count,
        fps=plan.fps,
        duration=info.frame_count / plan.fps,
        width=info.width,
        height=info.height,
    )


def compose_side_by_side(
    overhead: VideoAsset,
    front: VideoAsset,
    alignment: Sequence[AlignmentRow],
    out: Path,
    encoder: EncoderConfig | None = None,
    fps: float | None = None,
) -> VideoAsset | None:
    """Render a time-aligned side-by-side composite, overhead on the left.

    FILLER cells repeat the camera's most recent real frame; before the first
    real frame they render black.
    """
    from PIL import Image

    from .frames import VideoFrames

    if not alignment:
        return None
    for _, oi, fi in alignment:
        if oi is not None and not 0 <= oi < overhead.frame_count:
            raise IndexError(f"overhead index {oi} out of bounds")
        if fi is not None and not 0 <= fi < front.frame_count:
            raise IndexError(f"front index {fi} out of bounds")

    encoder = encoder or default_encoder()
    fps = fps if fps is not None else overhead.fps
    width = overhead.width + front.width
    height = max(overhead.height, front.height)

    o_src = VideoFrames(overhead.path)
    f_src = VideoFrames(front.path)
    last_left: Image.Image | None = None
    last_right: Image.Image | None = None

    with tempfile.TemporaryDirectory(prefix="trapline-composite-") as tmp:
        tmp_dir = Path(tmp)
        frame_paths = []
        for k, oi, fi in alignment:
            if oi is not None:
                last_left = o_src.image(oi)
            if fi is not None:
                last_right = f_src.image(fi)
            canvas = Image.new("RGB", (width, height))
            if last_left is not None:
                canvas.paste(last_left, (0, 0))
            if last_right is not None:
                canvas.paste(last_right, (overhead.width, 0))
            frame_path = tmp_dir / f"frame_{k:06d}.jpg"
            canvas.save(frame_path, "JPEG", quality=90)
            frame_paths.append(frame_path)
        run_encoder(frame_paths, fps, out, encoder)

    info = mp4.probe_mp4(out)
    if info.frame_count != len(alignment):
        raise EncodeError(
            f"{out}: composite has {info.frame_count} frames, alignment has {len(alignment)}"
        )
    return VideoAsset(
        path=out,
        frame_count=info.frame_count,
        fps=fps,
        duration=info.frame_count / fps,
        width=info.width,
        height=info.height,
    )
