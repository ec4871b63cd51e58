"""Bundled fallback video encoder: muxes JPEG frames into an MJPEG MP4.

This is a standalone command honoring the external-encoder contract (given N
images and an fps, produce an MP4 with exactly N frames at that fps) for
machines without ffmpeg. It does no pixel encoding itself; frames that are
already JPEG are stored byte for byte, anything else is converted to JPEG
first. ffmpeg remains the preferred encoder when installed.

Usage: trapline-mjpeg --list frames.txt --fps 30 --out day.mp4
where frames.txt holds one image path per line, in frame order.
"""

from __future__ import annotations

import argparse
import io
import struct
import sys
from pathlib import Path
from typing import Iterable, Sequence

_UNITY_MATRIX = struct.pack(
    ">9I", 0x00010000, 0, 0, 0, 0x00010000, 0, 0, 0, 0x40000000
)


def _box(box_type: bytes, payload: bytes) -> bytes:
    return struct.pack(">I4s", 8 + len(payload), box_type) + payload


def _fullbox(box_type: bytes, version: int, flags: int, payload: bytes) -> bytes:
    return _box(box_type, struct.pack(">I", (version << 24) | flags) + payload)


def _fps_to_rational(fps: float) -> tuple[int, int]:
    """(timescale, per-frame delta). Exact for the integer rates we use."""
    timescale = int(round(fps * 1000))
    return timescale, 1000


def _sample_entry(width: int, height: int) -> bytes:
    name = b"trapline mjpeg"
    compressor = bytes([len(name)]) + name + b"\x00" * (31 - len(name))
    payload = (
        b"\x00" * 6
        + struct.pack(">H", 1)  # data reference index
        + b"\x00" * 16
        + struct.pack(">HH", width, height)
        + struct.pack(">II", 0x00480000, 0x00480000)  # 72 dpi
        + b"\x00" * 4
        + struct.pack(">H", 1)  # frames per sample
        + compressor
        + struct.pack(">Hh", 24, -1)  # depth, color table id
    )
    return _box(b"jpeg", payload)


def _moov(sizes: Sequence[int], fps: float, width: int, height: int, chunk_offset: int) -> bytes:
    timescale, delta = _fps_to_rational(fps)
    count = len(sizes)
    duration = count * delta

    mvhd = _fullbox(
        b"mvhd",
        0,
        0,
        struct.pack(">IIII", 0, 0, timescale, duration)
        + struct.pack(">IH", 0x00010000, 0x0100)  # rate, volume
        + b"\x00" * 10
        + _UNITY_MATRIX
        + b"\x00" * 24
        + struct.pack(">I", 2),  # next track id
    )
    tkhd = _fullbox(
        b"tkhd",
        0,
        3,  # enabled + in movie
        struct.pack(">IIIII", 0, 0, 1, 0, duration)
        + b"\x00" * 8
        + struct.pack(">HHHH", 0, 0, 0, 0)  # layer, group, volume, reserved
        + _UNITY_MATRIX
        + struct.pack(">II", width << 16, height << 16),
    )
    mdhd = _fullbox(
        b"mdhd",
        0,
        0,
        struct.pack(">IIII", 0, 0, timescale, duration)
        + struct.pack(">HH", 0x55C4, 0),  # language 'und'
    )
    hdlr = _fullbox(
        b"hdlr", 0, 0, struct.pack(">I4s", 0, b"vide") + b"\x00" * 12 + b"VideoHandler\x00"
    )
    vmhd = _fullbox(b"vmhd", 0, 1, struct.pack(">HHHH", 0, 0, 0, 0))
    dref = _fullbox(b"dref", 0, 0, struct.pack(">I", 1) + _fullbox(b"url ", 0, 1, b""))
    dinf = _box(b"dinf", dref)

    stsd = _fullbox(b"stsd", 0, 0, struct.pack(">I", 1) + _sample_entry(width, height))
    stts = _fullbox(b"stts", 0, 0, struct.pack(">III", 1, count, delta))
    # One chunk holding every sample, laid out back to back in mdat.
    stsc = _fullbox(b"stsc", 0, 0, struct.pack(">IIII", 1, 1, count, 1))
    stsz = _fullbox(
        b"stsz",
        0,
        0,
        struct.pack(">II", 0, count) + struct.pack(f">{count}I", *sizes),
    )
    stco = _fullbox(b"stco", 0, 0, struct.pack(">II", 1, chunk_offset))

    stbl = _box(b"stbl", stsd + stts + stsc + stsz + stco)
    minf = _box(b"minf", vmhd + dinf + stbl)
    mdia = _box(b"mdia", mdhd + hdlr + minf)
    trak = _box(b"trak", tkhd + mdia)
    return _box(b"moov", mvhd + trak)


FTYP = _box(b"ftyp", b"isom" + struct.pack(">I", 0x200) + b"isomiso2mp41")


def mux_mjpeg(
    frames: Iterable[bytes], fps: float, out: Path, width: int, height: int
) -> int:
    """Write JPEG frame payloads into an MP4 container. Returns frame count."""
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to mux")
    sizes = [len(f) for f in frames]
    chunk_offset = len(FTYP) + 8  # mdat payload starts after its header
    mdat = struct.pack(">I4s", 8 + sum(sizes), b"mdat")
    with open(out, "wb") as fh:
        fh.write(FTYP)
        fh.write(mdat)
        for frame in frames:
            fh.write(frame)
        fh.write(_moov(sizes, fps, width, height, chunk_offset))
    return len(frames)


def _load_jpeg(path: Path, quality: int) -> tuple[bytes, int, int]:
    """Read one frame as JPEG bytes plus pixel dimensions."""
    from PIL import Image

    data = path.read_bytes()
    if data[:3] == b"\xff\xd8\xff":
        with Image.open(io.BytesIO(data)) as img:
            return data, img.width, img.height
    with Image.open(io.BytesIO(data)) as img:
        buf = io.BytesIO()
        img.convert("RGB").save(buf, "JPEG", quality=quality)
        return buf.getvalue(), img.width, img.height


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="Mux JPEG frames into an MJPEG MP4 (fallback encoder)."
    )
    parser.add_argument("--list", required=True, type=Path, help="file of frame paths, one per line")
    parser.add_argument("--fps", required=True, type=float)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--quality", type=int, default=90, help="JPEG quality for non-JPEG inputs")
    args = parser.parse_args(argv)

    try:
        paths = [
            Path(line) for line in args.list.read_text().splitlines() if line.strip()
        ]
        if not paths:
            raise ValueError(f"{args.list}: empty frame list")
        frames = []
        size = None
        for p in paths:
            data, w, h = _load_jpeg(p, args.quality)
            if size is None:
                size = (w, h)
            elif size != (w, h):
                raise ValueError(f"{p}: frame size {w}x{h} differs from {size[0]}x{size[1]}")
            frames.append(data)
        assert size is not None
        mux_mjpeg(frames, args.fps, args.out, size[0], size[1])
    except Exception as exc:
        print(f"trapline-mjpeg: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
