"""Minimal ISO BMFF (MP4) reader: frame counts, dimensions, fps, sample access.

Only the boxes needed to verify and serve our videos are parsed: moov, trak,
mdia, minf, stbl and the sample tables inside it. The parser is independent
of whatever encoder produced the file, so it doubles as the probe side of the
encode-then-verify contract.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

CONTAINER_BOXES = {b"moov", b"trak", b"mdia", b"minf", b"stbl"}


class Mp4Error(ValueError):
    """File is not a parseable MP4 or lacks a video track."""


@dataclass
class SampleTable:
    sizes: list[int]
    chunk_offsets: list[int]
    # stsc entries: (first_chunk, samples_per_chunk), 1-based chunks
    chunk_runs: list[tuple[int, int]]

    def sample_location(self, index: int) -> tuple[int, int]:
        """(byte offset, byte size) of sample `index` (0-based)."""
        if not 0 <= index < len(self.sizes):
            raise IndexError(f"sample {index} out of range 0..{len(self.sizes) - 1}")
        remaining = index
        chunk_no = 0  # 0-based over chunk_offsets
        for run_idx, (first, per_chunk) in enumerate(self.chunk_runs):
            if run_idx + 1 < len(self.chunk_runs):
                run_chunks = self.chunk_runs[run_idx + 1][0] - first
            else:
                run_chunks = len(self.chunk_offsets) - (first - 1)
            run_samples = run_chunks * per_chunk
            if remaining < run_samples:
                chunk_no = (first - 1) + remaining // per_chunk
                within = remaining % per_chunk
                first_in_chunk = index - within
                offset = self.chunk_offsets[chunk_no]
                offset += sum(self.sizes[first_in_chunk:index])
                return offset, self.sizes[index]
            remaining -= run_samples
        raise Mp4Error("sample table inconsistent with chunk map")


@dataclass
class Mp4Info:
    frame_count: int
    width: int
    height: int
    fps: float
    duration: float
    codec: str
    samples: SampleTable


def _read_boxes(fh: BinaryIO, start: int, end: int) -> Iterator[tuple[bytes, int, int]]:
    """Yield (type, payload_start, payload_end) for boxes in [start, end)."""
    pos = start
    while pos + 8 <= end:
        fh.seek(pos)
        header = fh.read(8)
        if len(header) < 8:
            return
        size, box_type = struct.unpack(">I4s", header)
        payload = pos + 8
        if size == 1:
            big = fh.read(8)
            size = struct.unpack(">Q", big)[0]
            payload = pos + 16
        elif size == 0:
            size = end - pos
        if size < 8 or pos + size > end:
            raise Mp4Error(f"bad box size {size} at offset {pos}")
        yield box_type, payload, pos + size
        pos += size


def _find(fh: BinaryIO, start: int, end: int, *path: bytes) -> list[tuple[int, int]]:
    """All (payload_start, payload_end) spans matching a box path."""
    spans = [(start, end)]
    for name in path:
        next_spans = []
        for s, e in spans:
            for box_type, ps, pe in _read_boxes(fh, s, e):
                if box_type == name:
                    next_spans.append((ps, pe))
        spans = next_spans
    return spans


def _fullbox(fh: BinaryIO, start: int) -> tuple[int, int]:
    fh.seek(start)
    version_flags = struct.unpack(">I", fh.read(4))[0]
    return version_flags >> 24, start + 4


def probe_mp4(path: Path) -> Mp4Info:
    """Parse the first video track's structure out of an MP4 file."""
    size = path.stat().st_size
    with open(path, "rb") as fh:
        moovs = _find(fh, 0, size, b"moov")
        if not moovs:
            raise Mp4Error(f"{path}: no moov box")
        moov = moovs[0]

        video_mdia = None
        for trak in _find(fh, moov[0], moov[1], b"trak"):
            for mdia in _find(fh, trak[0], trak[1], b"mdia"):
                for hdlr in _find(fh, mdia[0], mdia[1], b"hdlr"):
                    fh.seek(hdlr[0] + 8)  # version/flags + pre_defined
                    if fh.read(4) == b"vide":
                        video_mdia = mdia
                        break
                if video_mdia:
                    break
            if video_mdia:
                break
        if video_mdia is None:
            raise Mp4Error(f"{path}: no video track")

        mdhd = _find(fh, video_mdia[0], video_mdia[1], b"mdhd")[0]
        version, body = _fullbox(fh, mdhd[0])
        fh.seek(body)
        if version == 1:
            _, _, timescale, duration = struct.unpack(">QQIQ", fh.read(28))
        else:
            _, _, timescale, duration = struct.unpack(">IIII", fh.read(16))

        stbl = _find(fh, video_mdia[0], video_mdia[1], b"minf", b"stbl")[0]

        # stsd: codec fourcc plus coded width/height
        stsd = _find(fh, stbl[0], stbl[1], b"stsd")[0]
        fh.seek(stsd[0] + 4)
        entry_count = struct.unpack(">I", fh.read(4))[0]
        if entry_count < 1:
            raise Mp4Error(f"{path}: empty stsd")
        entry_start = stsd[0] + 8
        fh.seek(entry_start)
        _, fourcc = struct.unpack(">I4s", fh.read(8))
        codec = fourcc.decode("ascii", "replace")
        fh.seek(entry_start + 8 + 24)  # sample entry header + visual reserved fields
        width, height = struct.unpack(">HH", fh.read(4))

        # stts: frame timing
        stts = _find(fh, stbl[0], stbl[1], b"stts")[0]
        _, body = _fullbox(fh, stts[0])
        fh.seek(body)
        stts_count = struct.unpack(">I", fh.read(4))[0]
        stts_entries = [
            struct.unpack(">II", fh.read(8)) for _ in range(stts_count)
        ]

        # stsz: sample count and sizes
        stsz = _find(fh, stbl[0], stbl[1], b"stsz")[0]
        _, body = _fullbox(fh, stsz[0])
        fh.seek(body)
        uniform, count = struct.unpack(">II", fh.read(8))
        if uniform:
            sizes = [uniform] * count
        else:
            raw = fh.read(4 * count)
            sizes = list(struct.unpack(f">{count}I", raw))

        # stsc + stco/co64: chunk layout
        stsc = _find(fh, stbl[0], stbl[1], b"stsc")[0]
        _, body = _fullbox(fh, stsc[0])
        fh.seek(body)
        run_count = struct.unpack(">I", fh.read(4))[0]
        chunk_runs = []
        for _ in range(run_count):
            first, per_chunk, _desc = struct.unpack(">III", fh.read(12))
            chunk_runs.append((first, per_chunk))

        stco = _find(fh, stbl[0], stbl[1], b"stco")
        if stco:
            _, body = _fullbox(fh, stco[0][0])
            fh.seek(body)
            n = struct.unpack(">I", fh.read(4))[0]
            offsets = list(struct.unpack(f">{n}I", fh.read(4 * n)))
        else:
            co64 = _find(fh, stbl[0], stbl[1], b"co64")
            if not co64:
                raise Mp4Error(f"{path}: no chunk offset box")
            _, body = _fullbox(fh, co64[0][0])
            fh.seek(body)
            n = struct.unpack(">I", fh.read(4))[0]
            offsets = list(struct.unpack(f">{n}Q", fh.read(8 * n)))

    total_ticks = sum(c * d for c, d in stts_entries)
    if stts_entries and all(d == stts_entries[0][1] for _, d in stts_entries):
        fps = timescale / stts_entries[0][1] if stts_entries[0][1] else 0.0
    elif total_ticks:
        fps = count * timescale / total_ticks
    else:
        fps = 0.0

    return Mp4Info(
        frame_count=count,
        width=width,
        height=height,
        fps=fps,
        duration=duration / timescale if timescale else 0.0,
        codec=codec,
        samples=SampleTable(sizes, offsets, chunk_runs),
    )


def read_sample(path: Path, info: Mp4Info, index: int) -> bytes:
    """Raw bytes of one sample (for MJPEG tracks, one complete JPEG)."""
    offset, size = info.samples.sample_location(index)
    with open(path, "rb") as fh:
        fh.seek(offset)
        data = fh.read(size)
    if len(data) != size:
        raise Mp4Error(f"{path}: truncated sample {index}")
    return data


def is_mjpeg(path: Path, info: Mp4Info) -> bool:
    """True when samples are standalone JPEGs we can serve without a decoder."""
    if info.frame_count == 0:
        return False
    try:
        return read_sample(path, info, 0)[:3] == b"\xff\xd8\xff"
    except (Mp4Error, IndexError):
        return False
