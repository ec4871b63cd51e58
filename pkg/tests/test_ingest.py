import threading
from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from trapline.ingest import (
    CaptureMeta,
    MetadataError,
    ManifestProvider,
    View,
    canonical_name,
    ingest_card,
    ingest_cards,
    parse_canonical_name,
    parse_capture_meta,
    recording_id,
    split_recording_id,
)


class TestParseCaptureMeta:
    def test_plain_line(self):
        meta = parse_capture_meta("IMG_0001.JPG,B07,O,2021-03-14 09:15:05")
        assert meta.burrow_id == "B07"
        assert meta.view is View.OVERHEAD
        assert meta.timestamp == datetime(2021, 3, 14, 9, 15, 5)
        assert not meta.out_of_schedule

    def test_out_of_schedule_is_flagged_not_rejected(self):
        meta = parse_capture_meta("IMG_0002.JPG,B07,O,2021-03-14 22:00:00")
        assert meta.out_of_schedule

    def test_schedule_boundaries_are_in_schedule(self):
        assert not parse_capture_meta("a.jpg,B07,O,2021-03-14 07:00:00").out_of_schedule
        assert not parse_capture_meta("a.jpg,B07,O,2021-03-14 20:00:00").out_of_schedule
        assert parse_capture_meta("a.jpg,B07,O,2021-03-14 06:59:59").out_of_schedule
        assert parse_capture_meta("a.jpg,B07,O,2021-03-14 20:00:01").out_of_schedule

    def test_missing_view_is_an_error(self):
        with pytest.raises(MetadataError, match="missing view"):
            parse_capture_meta("IMG_0003.JPG,B07,,2021-03-14 09:15:10")

    def test_front_view(self):
        assert parse_capture_meta("x.jpg,B07,F,2021-03-14 09:15:05").view is View.FRONT

    @pytest.mark.parametrize(
        "line",
        [
            "IMG.JPG,B07,O",  # missing timestamp field
            "IMG.JPG,,O,2021-03-14 09:15:05",  # missing burrow
            "IMG.JPG,B07,X,2021-03-14 09:15:05",  # unknown view
            "IMG.JPG,B07,O,2021-03-14T09:15:05",  # wrong timestamp format
            "IMG.JPG,B-7,O,2021-03-14 09:15:05",  # hyphen in burrow
        ],
    )
    def test_malformed_records(self, line):
        with pytest.raises(MetadataError):
            parse_capture_meta(line)


class TestCanonicalName:
    def test_overhead(self):
        meta = CaptureMeta("B07", View.OVERHEAD, datetime(2021, 3, 14, 9, 15, 5))
        assert canonical_name(meta) == "B07-O-20210314-091505.jpg"

    def test_view_distinguishes_names(self):
        ts = datetime(2021, 3, 14, 9, 15, 5)
        assert canonical_name(CaptureMeta("B07", View.FRONT, ts)) == "B07-F-20210314-091505.jpg"

    def test_one_second_apart_distinct(self):
        a = CaptureMeta("B07", View.OVERHEAD, datetime(2021, 3, 14, 9, 15, 5))
        b = CaptureMeta("B07", View.OVERHEAD, datetime(2021, 3, 14, 9, 15, 6))
        assert canonical_name(a) != canonical_name(b)


burrows = st.text(
    alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789", min_size=1, max_size=6
)
timestamps = st.datetimes(
    min_value=datetime(2000, 1, 1), max_value=datetime(2099, 12, 31)
).map(lambda d: d.replace(microsecond=0))
metas = st.builds(CaptureMeta, burrows, st.sampled_from(View), timestamps)


@given(metas, metas)
def test_canonical_name_injective(a, b):
    if (a.burrow_id, a.view, a.timestamp) != (b.burrow_id, b.view, b.timestamp):
        assert canonical_name(a) != canonical_name(b)
    else:
        assert canonical_name(a) == canonical_name(b)


@given(metas)
def test_canonical_name_round_trips(meta):
    assert parse_canonical_name(canonical_name(meta)) == meta


@given(metas)
def test_recording_id_round_trips(meta):
    burrow, view, date = split_recording_id(recording_id(meta))
    assert burrow == meta.burrow_id
    assert view is meta.view
    assert date == f"{meta.timestamp:%Y%m%d}"


class TestIngestCard:
    def test_copies_into_archive_layout(self, make_card, tmp_path):
        card = make_card(count=3)
        dest = tmp_path / "archive"
        report = ingest_card(card.source, dest, ManifestProvider(card.manifest))
        assert report.copied == 3
        assert report.skipped_duplicates == 0
        assert report.errors == []
        assert report.examined == 3
        day = dest / "B07" / "O" / "20210314"
        assert sorted(p.name for p in day.iterdir()) == [
            "B07-O-20210314-090000.jpg",
            "B07-O-20210314-090005.jpg",
            "B07-O-20210314-090010.jpg",
        ]

    def test_rerun_is_idempotent(self, make_card, tmp_path, digest_tree):
        card = make_card(count=4)
        dest = tmp_path / "archive"
        provider = ManifestProvider(card.manifest)
        ingest_card(card.source, dest, provider)
        first = digest_tree(dest)
        report = ingest_card(card.source, dest, provider)
        assert report.copied == 0
        assert report.skipped_duplicates == 4
        assert digest_tree(dest) == first

    def test_unreadable_file_is_isolated(self, make_card, tmp_path):
        card = make_card(count=3)
        # A dangling symlink listed in the manifest: per-file copy error.
        broken = card.source / "IMG_99999.JPG"
        broken.symlink_to(card.source / "does-not-exist.JPG")
        with open(card.manifest, "a") as fh:
            fh.write("IMG_99999.JPG,B07,O,2021-03-14 10:00:00\n")
        report = ingest_card(card.source, tmp_path / "archive", ManifestProvider(card.manifest))
        assert report.copied == 3
        assert len(report.errors) == 1
        assert report.examined == 4

    def test_metadata_gap_is_isolated(self, make_card, jpeg_bytes, tmp_path):
        card = make_card(count=2)
        (card.source / "IMG_NOMETA.JPG").write_bytes(jpeg_bytes(tag=999))
        report = ingest_card(card.source, tmp_path / "archive", ManifestProvider(card.manifest))
        assert report.copied == 2
        assert len(report.errors) == 1
        assert "no manifest entry" in report.errors[0][1]

    def test_same_name_different_content_is_an_error(self, make_card, jpeg_bytes, tmp_path):
        card = make_card(count=1)
        dest = tmp_path / "archive"
        provider = ManifestProvider(card.manifest)
        ingest_card(card.source, dest, provider)
        target = next((dest / "B07" / "O" / "20210314").iterdir())
        target.write_bytes(jpeg_bytes(tag=424242))
        before = target.read_bytes()
        report = ingest_card(card.source, dest, provider)
        assert report.copied == 0
        assert report.skipped_duplicates == 0
        assert len(report.errors) == 1
        assert "different content" in report.errors[0][1]
        assert target.read_bytes() == before  # never overwritten

    def test_out_of_schedule_counted(self, make_card, tmp_path):
        card = make_card(count=2, start="21:00:00")
        report = ingest_card(card.source, tmp_path / "archive", ManifestProvider(card.manifest))
        assert report.copied == 2
        assert report.out_of_schedule == 2

    def test_rate_accounting(self, make_card, tmp_path):
        card = make_card(count=5)
        report = ingest_card(card.source, tmp_path / "archive", ManifestProvider(card.manifest))
        assert report.elapsed > 0
        assert report.rate == pytest.approx(5 / report.elapsed)


def test_parallel_cards_match_sequential(make_card, tmp_path, digest_tree):
    card_a = make_card(name="cardA", burrow="B01", count=6)
    card_b = make_card(name="cardB", burrow="B02", count=6)
    seq_dest = tmp_path / "seq"
    for card in (card_a, card_b):
        ingest_card(card.source, seq_dest, ManifestProvider(card.manifest))

    par_dest = tmp_path / "par"
    threads = [
        threading.Thread(
            target=ingest_card, args=(c.source, par_dest, ManifestProvider(c.manifest))
        )
        for c in (card_a, card_b)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert digest_tree(par_dest) == digest_tree(seq_dest)


def test_ingest_cards_helper(make_card, tmp_path):
    cards = [make_card(name=f"c{i}", burrow=f"B{i}", count=2) for i in range(3)]
    reports = ingest_cards(cards, tmp_path / "archive", workers=3)
    assert len(reports) == 3
    assert all(r.copied == 2 for r in reports.values())
