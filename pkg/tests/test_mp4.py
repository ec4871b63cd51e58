import io

import pytest
from PIL import Image

from trapline import mp4
from trapline.mjpeg import mux_mjpeg


def jpeg_frames(count, size=(32, 24)):
    frames = []
    for i in range(count):
        img = Image.new("RGB", size, (i * 17 % 255, 120, 60))
        buf = io.BytesIO()
        img.save(buf, "JPEG")
        frames.append(buf.getvalue())
    return frames


class TestMuxProbeRoundTrip:
    def test_structure(self, tmp_path):
        frames = jpeg_frames(9)
        out = tmp_path / "clip.mp4"
        assert mux_mjpeg(frames, 30.0, out, 32, 24) == 9
        info = mp4.probe_mp4(out)
        assert info.frame_count == 9
        assert (info.width, info.height) == (32, 24)
        assert info.fps == pytest.approx(30.0)
        assert info.duration == pytest.approx(9 / 30)
        assert info.codec == "jpeg"

    def test_samples_byte_identical(self, tmp_path):
        frames = jpeg_frames(5)
        out = tmp_path / "clip.mp4"
        mux_mjpeg(frames, 10.0, out, 32, 24)
        info = mp4.probe_mp4(out)
        for i, original in enumerate(frames):
            assert mp4.read_sample(out, info, i) == original
        assert mp4.is_mjpeg(out, info)

    def test_samples_decode(self, tmp_path):
        frames = jpeg_frames(3)
        out = tmp_path / "clip.mp4"
        mux_mjpeg(frames, 30.0, out, 32, 24)
        info = mp4.probe_mp4(out)
        img = Image.open(io.BytesIO(mp4.read_sample(out, info, 2)))
        assert img.size == (32, 24)

    def test_fractional_fps(self, tmp_path):
        frames = jpeg_frames(4)
        out = tmp_path / "clip.mp4"
        mux_mjpeg(frames, 12.5, out, 32, 24)
        assert mp4.probe_mp4(out).fps == pytest.approx(12.5)

    def test_deterministic_output(self, tmp_path):
        frames = jpeg_frames(4)
        a, b = tmp_path / "a.mp4", tmp_path / "b.mp4"
        mux_mjpeg(frames, 30.0, a, 32, 24)
        mux_mjpeg(frames, 30.0, b, 32, 24)
        assert a.read_bytes() == b.read_bytes()

    def test_no_frames_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            mux_mjpeg([], 30.0, tmp_path / "x.mp4", 32, 24)


class TestProbeErrors:
    def test_not_an_mp4(self, tmp_path):
        bogus = tmp_path / "bogus.mp4"
        bogus.write_bytes(b"certainly not an mp4 file" * 4)
        with pytest.raises(mp4.Mp4Error):
            mp4.probe_mp4(bogus)

    def test_sample_out_of_range(self, tmp_path):
        out = tmp_path / "clip.mp4"
        mux_mjpeg(jpeg_frames(2), 30.0, out, 32, 24)
        info = mp4.probe_mp4(out)
        with pytest.raises(IndexError):
            mp4.read_sample(out, info, 2)


class TestMjpegCli:
    def test_list_mode(self, tmp_path):
        import subprocess
        import sys

        paths = []
        for i, frame in enumerate(jpeg_frames(3)):
            p = tmp_path / f"{i}.jpg"
            p.write_bytes(frame)
            paths.append(p)
        listfile = tmp_path / "list.txt"
        listfile.write_text("".join(f"{p}\n" for p in paths))
        out = tmp_path / "cli.mp4"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "trapline.mjpeg",
                "--list",
                str(listfile),
                "--fps",
                "30",
                "--out",
                str(out),
            ],
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert mp4.probe_mp4(out).frame_count == 3

    def test_mismatched_sizes_fail(self, tmp_path):
        import subprocess
        import sys

        small = tmp_path / "small.jpg"
        big = tmp_path / "big.jpg"
        small.write_bytes(jpeg_frames(1, (16, 16))[0])
        big.write_bytes(jpeg_frames(1, (32, 32))[0])
        listfile = tmp_path / "list.txt"
        listfile.write_text(f"{small}\n{big}\n")
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "trapline.mjpeg",
                "--list",
                str(listfile),
                "--fps",
                "30",
                "--out",
                str(tmp_path / "x.mp4"),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "differs" in proc.stderr
