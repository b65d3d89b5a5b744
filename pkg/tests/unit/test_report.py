from datetime import date, datetime, timezone

import pytest

from tests.conftest import make_record, make_scorecard
from utpada.core.exceptions import UnknownParticipant
from utpada.database.metric_db import MetricDb
from utpada.models.metric_dto import ValidationSummary
from utpada.models.rsi_dto import Classification, SnippetUse
from utpada.services.metrics_service import MetricsService
from utpada.services.report_service import ReportService
from utpada.services.rsi_service import RsiService


def add_scored(db: MetricDb, record, score: int = 4, productivity: float = 25,
               snippet_use: SnippetUse = SnippetUse.NONE) -> None:
    db.append_contribution(record)
    card = make_scorecard(record.contribution_id, score=score, productivity=productivity, snippet_use=snippet_use)
    db.append_scorecard(card)
    db.append_rsi(RsiService.compute_rsi(card))


def run_summary(generated_at: datetime, org: str, incorrect: int, missing: int) -> ValidationSummary:
    return ValidationSummary(run_id=f"{org}-{generated_at:%Y%m%d}", org=org, generated_at=generated_at,
                             cases_run=1, files_scanned=1, correct=0, incorrect=incorrect, missing=missing,
                             not_applicable=0)


class TestCohortReport:
    def test_reliance_and_correct_usage_rates(self, memory_db):
        for number in range(2002):
            backed = number < 1921
            record = make_record(f"C-{number:04d}", participant_id=f"P-{number % 4:03d}",
                                 snippet_ids=("SNIP-000001",) if backed else ())
            memory_db.append_contribution(record)
            if backed and number < 1710:
                memory_db.append_scorecard(make_scorecard(record.contribution_id, snippet_use=SnippetUse.APPROPRIATE))
            elif backed:
                memory_db.append_scorecard(make_scorecard(record.contribution_id, snippet_use=SnippetUse.INAPPROPRIATE))

        report = ReportService.cohort_report(memory_db)

        assert (report.totals.contributions, report.totals.bank_backed, report.totals.appropriate) == (2002, 1921, 1710)
        assert round(report.reliance_rate, 4) == 0.9595
        assert round(report.correct_snippet_rate, 4) == 0.8902
        # 没有 RSI 记录的参与者不参与分类
        assert report.participants == []

    def test_unknown_snippet_ids_do_not_count_with_bank(self, memory_db, bank, curated_fix):
        memory_db.append_contribution(make_record("C-1", snippet_ids=("SNIP-000001",)))
        memory_db.append_contribution(make_record("C-2", snippet_ids=("SNIP-000777",)))
        memory_db.append_contribution(make_record("C-3", snippet_ids=("not-a-snippet",)))

        assert ReportService.cohort_report(memory_db).totals.bank_backed == 2
        assert ReportService.cohort_report(memory_db, bank).totals.bank_backed == 1

    def test_empty_db(self, memory_db):
        report = ReportService.cohort_report(memory_db)
        assert report.totals.contributions == 0
        assert report.reliance_rate is None
        assert report.correct_snippet_rate is None

    def test_participant_classification(self, memory_db):
        for number, score in enumerate([5, 5, 5, 5]):
            add_scored(memory_db, make_record(f"C-A{number}", participant_id="P-A", snippet_ids=("SNIP-000001",)),
                       score=score, productivity=40)
        add_scored(memory_db, make_record("C-B0", participant_id="P-B"), score=2, productivity=10)

        report = ReportService.cohort_report(memory_db)

        rows = {row.participant_id: row for row in report.participants}
        assert rows["P-A"].classification == Classification.EXCEPTIONAL
        assert rows["P-A"].reliance_rate == 1.0
        assert rows["P-B"].classification == Classification.UNDERPERFORMER
        assert rows["P-B"].reliance_rate == 0.0


class TestQualityTrend:
    def test_quarterly_change(self, memory_db):
        memory_db.append_validation_summary(run_summary(datetime(2024, 1, 10, tzinfo=timezone.utc), "web", 4, 2))
        memory_db.append_validation_summary(run_summary(datetime(2024, 2, 10, tzinfo=timezone.utc), "web", 2, 2))
        memory_db.append_validation_summary(run_summary(datetime(2024, 4, 5, tzinfo=timezone.utc), "web", 3, 1))
        memory_db.append_validation_summary(run_summary(datetime(2024, 11, 5, tzinfo=timezone.utc), "web", 1, 1))
        memory_db.append_validation_summary(run_summary(datetime(2024, 3, 1, tzinfo=timezone.utc), "mobile", 5, 0))

        rows = ReportService.quality_trend(memory_db)

        assert [(r.org, r.period, r.runs, r.fatal, r.trivial) for r in rows] == [
            ("mobile", "2024-Q1", 1, 5, 0),
            ("web", "2024-Q1", 2, 6, 4),
            ("web", "2024-Q2", 1, 3, 1),
            ("web", "2024-Q4", 1, 1, 1),
        ]
        assert (rows[2].fatal_change_pct, rows[2].trivial_change_pct) == (-50.0, -75.0)
        # 不相邻的季度不计算变化
        assert rows[3].fatal_change_pct is None
        assert rows[1].fatal_change_pct is None

    def test_zero_previous_has_no_change(self, memory_db):
        memory_db.append_validation_summary(run_summary(datetime(2024, 1, 10, tzinfo=timezone.utc), "web", 0, 0))
        memory_db.append_validation_summary(run_summary(datetime(2024, 4, 10, tzinfo=timezone.utc), "web", 2, 0))
        assert ReportService.quality_trend(memory_db)[1].fatal_change_pct is None


class TestParticipantReport:
    @pytest.fixture
    def checkin_db(self, memory_db, fixtures_dir):
        batch = MetricsService.parse_checkins((fixtures_dir / "checkins.tsv").read_text(encoding="utf-8"))
        for record in batch.records:
            memory_db.append_contribution(record)
        for contribution_id, productivity in (("C-001", 25), ("C-003", 17)):
            card = make_scorecard(contribution_id, score=4, productivity=productivity)
            memory_db.append_scorecard(card)
            memory_db.append_rsi(RsiService.compute_rsi(card))
        return memory_db

    def test_rsi_series_per_sprint(self, checkin_db):
        report = ReportService.participant_report(checkin_db, "P-001")

        assert report.contributions == 3
        assert [(row.index, row.start, row.count, row.mean_rsi, row.passed) for row in report.series] == [
            (0, date(2024, 1, 1), 1, 6.5, 1),
            (1, date(2024, 1, 9), 1, 5.7, 0),
        ]
        assert report.summary.classification == Classification.UNDERPERFORMER
        assert report.summary.mean_rsi == pytest.approx(6.1)
        assert report.summary.reliance_rate == pytest.approx(2 / 3)
        assert [s.lines_changed for s in report.agile.sprints] == [75, 20]

    def test_participant_without_scores(self, checkin_db):
        report = ReportService.participant_report(checkin_db, "P-002")
        assert report.summary is None
        assert report.series == []
        assert report.contributions == 1

    def test_unknown_participant(self, checkin_db):
        with pytest.raises(UnknownParticipant):
            ReportService.participant_report(checkin_db, "P-404")


class TestMask:
    def test_identifiers_are_replaced_consistently(self, tmp_path, memory_db):
        add_scored(memory_db, make_record("C-1", participant_id="P-001"))
        add_scored(memory_db, make_record("C-2", participant_id="P-001"))
        add_scored(memory_db, make_record("C-3", participant_id="P-002"))
        out = tmp_path / "masked.db"

        assert ReportService.mask(memory_db, "secret", out) == 9

        masked = MetricDb.open(out, read_only=True)
        owners = {cid: r.participant_id for cid, r in masked.contributions.items()}
        assert owners["C-1"] == owners["C-2"] != owners["C-3"]
        assert all(owner.startswith("anon-") and len(owner) == 17 for owner in owners.values())
        assert {card.reviewer_id for card in masked.scorecards.values()} != {"R-01"}
        assert masked.rsi_scores == memory_db.rsi_scores
        assert memory_db.contributions["C-1"].participant_id == "P-001"
        assert [e.seq for e in masked.events] == [e.seq for e in memory_db.events]
