import os
import random
from datetime import datetime, timezone

import pytest

from tests.conftest import make_record, make_scorecard
from utpada.core.exceptions import DanglingReference, DuplicateContribution, StoreCorrupt, StoreLocked
from utpada.database.metric_db import HEADER, MetricDb, decode_records, encode_record
from utpada.models.metric_dto import CurationEvent, EventKind, MetricEvent, ValidationSummary
from utpada.services.rsi_service import RsiService

TS = datetime(2024, 1, 5, 12, 0, tzinfo=timezone.utc)


def summary(run_id: str = "run-1", org: str = "default", incorrect: int = 1) -> ValidationSummary:
    return ValidationSummary(run_id=run_id, org=org, generated_at=TS, cases_run=2, files_scanned=3,
                             correct=2, incorrect=incorrect, missing=0, not_applicable=3)


def fill(db: MetricDb) -> None:
    db.append_contribution(make_record("C-001"))
    db.append_contribution(make_record("C-002", participant_id="P-002"))
    card = make_scorecard("C-001", score=4, productivity=25)
    db.append_scorecard(card)
    db.append_rsi(RsiService.compute_rsi(card))
    db.append_validation_summary(summary())
    db.append_curation(CurationEvent(snippet_id="SNIP-000001", approved=True, curated_by="R-01"))


def state(db: MetricDb):
    return db.contributions, db.scorecards, db.rsi_scores, db.validation_summaries()


class TestAppendAndReplay:
    def test_reopen_restores_state(self, db_path):
        with MetricDb.open(db_path) as db:
            fill(db)
            expected = state(db)
            events = db.events

        reopened = MetricDb.open(db_path, read_only=True)

        assert reopened.events == events
        assert [e.seq for e in reopened.events] == [1, 2, 3, 4, 5, 6]
        assert state(reopened) == expected
        assert reopened.participants() == ["P-001", "P-002"]

    def test_replay_from_bytes_matches(self, memory_db):
        fill(memory_db)

        replayed = MetricDb.from_bytes(memory_db.serialize())

        assert replayed.events == memory_db.events
        assert state(replayed) == state(memory_db)

    def test_latest_scorecard_wins(self, memory_db):
        memory_db.append_contribution(make_record("C-001"))
        memory_db.append_scorecard(make_scorecard("C-001", score=2, reviewer="R-01"))
        memory_db.append_scorecard(make_scorecard("C-001", score=5, reviewer="R-02"))

        assert memory_db.scorecards["C-001"].reviewer_id == "R-02"
        assert len(memory_db.events_of(EventKind.SCORECARD)) == 2

    def test_records_of_sorted_by_submission(self, memory_db):
        memory_db.append_contribution(make_record("C-002", submitted="2024-01-04T10:00:00"))
        memory_db.append_contribution(make_record("C-001", submitted="2024-01-04T11:00:00"))
        assert [r.contribution_id for r in memory_db.records_of("P-001")] == ["C-002", "C-001"]
        assert memory_db.records_of("P-404") == []


class TestReferences:
    def test_scorecard_without_contribution(self, db_path):
        with MetricDb.open(db_path) as db:
            db.append_contribution(make_record("C-001"))
            size = db_path.stat().st_size

            with pytest.raises(DanglingReference):
                db.append_scorecard(make_scorecard("C-404"))
            with pytest.raises(DanglingReference):
                db.append_rsi(RsiService.compute_rsi(make_scorecard("C-404", productivity=25)))

            assert db.last_seq == 1
            assert db_path.stat().st_size == size

    def test_duplicate_contribution(self, memory_db):
        memory_db.append_contribution(make_record("C-001"))
        with pytest.raises(DuplicateContribution):
            memory_db.append_contribution(make_record("C-001", loc=(1, 1, 1)))
        assert memory_db.last_seq == 1

    def test_read_only(self, db_path):
        with MetricDb.open(db_path) as db:
            db.append_contribution(make_record("C-001"))
        reader = MetricDb.open(db_path, read_only=True)
        with pytest.raises(PermissionError):
            reader.append_validation_summary(summary())


class TestLocking:
    def test_second_writer_is_rejected(self, db_path):
        with MetricDb.open(db_path):
            with pytest.raises(StoreLocked):
                MetricDb.open(db_path)
            # 只读打开不受写锁影响
            assert MetricDb.open(db_path, read_only=True).events == []

    def test_lock_released_on_close(self, db_path):
        MetricDb.open(db_path).close()
        with MetricDb.open(db_path) as db:
            assert db.last_seq == 0


class TestRecovery:
    @pytest.fixture
    def log_bytes(self, memory_db):
        fill(memory_db)
        for index in range(6):
            memory_db.append_validation_summary(summary(run_id=f"run-{index + 2}", incorrect=index))
        return memory_db.serialize(), memory_db.events

    def test_truncated_tail_is_dropped(self, tmp_path, log_bytes, no_fsync):
        data, events = log_bytes
        boundaries = [0]
        for event in events:
            boundaries.append(boundaries[-1] + len(encode_record(event)))
        assert boundaries[-1] == len(data)

        rng = random.Random(4)
        for iteration in range(1000):
            cut = rng.randint(0, len(data))
            path = tmp_path / f"cut{iteration % 8}.db"
            path.write_bytes(data[:cut])

            with MetricDb.open(path) as db:
                complete = max(i for i, end in enumerate(boundaries) if end <= cut)
                assert db.events == events[:complete], cut
                assert path.stat().st_size == boundaries[complete]
                # 截断之后可以继续追加
                if iteration % 100 == 0:
                    seq = db.append_curation(CurationEvent(snippet_id="SNIP-000009", approved=False))
                    assert seq == complete + 1

    def test_failed_append_leaves_no_partial_record(self, db_path, monkeypatch):
        with MetricDb.open(db_path, fsync=True) as db:
            db.append_contribution(make_record("C-001"))
            size = db_path.stat().st_size

            def disk_full(fd):
                raise OSError(28, "No space left on device")

            # 记录已经 flush 到文件，落盘时失败
            monkeypatch.setattr(os, "fsync", disk_full)
            with pytest.raises(OSError):
                db.append_validation_summary(summary())
            assert db_path.stat().st_size == size
            assert db.last_seq == 1

            monkeypatch.setattr(os, "fsync", lambda fd: None)
            assert db.append_validation_summary(summary(run_id="run-2")) == 2

        reopened = MetricDb.open(db_path, read_only=True)
        assert [e.seq for e in reopened.events] == [1, 2]
        assert [s.run_id for s in reopened.validation_summaries()] == ["run-2"]

    def test_read_only_open_does_not_truncate(self, db_path, log_bytes):
        data, events = log_bytes
        db_path.write_bytes(data + b"\x00\x00")

        db = MetricDb.open(db_path, read_only=True)

        assert db.events == events
        assert db_path.stat().st_size == len(data) + 2

    def test_checksum_mismatch_is_corruption(self, db_path, log_bytes):
        data, events = log_bytes
        second = len(encode_record(events[0]))
        corrupted = bytearray(data)
        corrupted[second + HEADER.size + 3] ^= 0xFF
        db_path.write_bytes(bytes(corrupted))

        with pytest.raises(StoreCorrupt) as info:
            MetricDb.open(db_path)
        assert info.value.offset == second

    def test_corrupt_open_releases_lock(self, db_path, log_bytes):
        data, _ = log_bytes
        db_path.write_bytes(data[:HEADER.size] + b"X" + data[HEADER.size + 1:])
        with pytest.raises(StoreCorrupt):
            MetricDb.open(db_path)
        db_path.write_bytes(b"")
        MetricDb.open(db_path).close()

    def test_sequence_must_increase(self):
        first = MetricEvent(seq=2, ts=TS, kind=EventKind.CURATION, data={"snippet_id": "SNIP-000001", "approved": True})
        second = first.model_copy(update={"seq": 1})
        with pytest.raises(StoreCorrupt):
            decode_records(encode_record(first) + encode_record(second))


class TestRewrite:
    def test_identity_rewrite_round_trips(self, tmp_path, memory_db):
        fill(memory_db)
        out = tmp_path / "copy.db"

        assert memory_db.rewrite(out, lambda event: event) == 6
        assert out.read_bytes() == memory_db.serialize()
