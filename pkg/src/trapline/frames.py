"""Random access to individual video frames as JPEG payloads.

MJPEG tracks are served straight out of the container, byte for byte. Other
codecs need an external decoder (ffmpeg); the configured command must write
one JPEG frame to stdout.
"""

from __future__ import annotations

import io
import shutil
import subprocess
from dataclasses import dataclass
from pathlib import Path

from . import mp4


class FrameExtractError(RuntimeError):
    pass


@dataclass
class DecoderConfig:
    """Frame decoder invocation; argv placeholders: {video} {index}."""

    name: str
    argv: list[str]


def ffmpeg_decoder(binary: str = "ffmpeg") -> DecoderConfig:
    return DecoderConfig(
        name=binary,
        argv=[
            binary,
            "-hide_banner",
            "-loglevel",
            "error",
            "-i",
            "{video}",
            "-vf",
            "select=eq(n\\,{index})",
            "-frames:v",
            "1",
            "-c:v",
            "mjpeg",
            "-q:v",
            "2",
            "-f",
            "image2",
            "-",
        ],
    )


def default_decoder() -> DecoderConfig | None:
    if shutil.which("ffmpeg"):
        return ffmpeg_decoder()
    return None


class VideoFrames:
    """Frame reader for one MP4 file."""

    def __init__(self, path: Path, decoder: DecoderConfig | None = None):
        self.path = Path(path)
        self.info = mp4.probe_mp4(self.path)
        self._mjpeg = mp4.is_mjpeg(self.path, self.info)
        self._decoder = decoder if decoder is not None else default_decoder()

    def __len__(self) -> int:
        return self.info.frame_count

    def jpeg(self, index: int) -> bytes:
        """Frame `index` as JPEG bytes. Byte-stable for MJPEG sources."""
        if not 0 <= index < self.info.frame_count:
            raise IndexError(
                f"frame {index} out of range 0..{self.info.frame_count - 1}"
            )
        if self._mjpeg:
            return mp4.read_sample(self.path, self.info, index)
        if self._decoder is None:
            raise FrameExtractError(
                f"{self.path}: codec {self.info.codec} needs an external decoder "
                "and none is available"
            )
        subs = {"video": str(self.path), "index": str(index)}
        argv = [a.format_map(subs) for a in self._decoder.argv]
        proc = subprocess.run(argv, capture_output=True, check=False)
        if proc.returncode != 0 or not proc.stdout:
            tail = proc.stderr.decode("utf-8", "replace").strip()[-500:]
            raise FrameExtractError(f"{self.path}: decoder failed on frame {index}: {tail}")
        return proc.stdout

    def image(self, index: int):
        from PIL import Image

        img = Image.open(io.BytesIO(self.jpeg(index)))
        return img.convert("RGB")
