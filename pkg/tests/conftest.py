import os
from datetime import datetime
from pathlib import Path

import pytest

from utpada.config import settings
from utpada.database.metric_db import MetricDb
from utpada.models.metrics_dto import ContributionRecord, ContributionStatus
from utpada.models.rsi_dto import ReviewCategory, Scorecard, SnippetUse
from utpada.services.snippet_service import SnippetBankService

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """每个测试使用独立的存储路径，互不影响"""
    monkeypatch.setattr(settings, "DB", str(tmp_path / "metric.db"))
    monkeypatch.setattr(settings, "BANK", str(tmp_path / "bank"))
    monkeypatch.setattr(settings, "CASES", str(FIXTURES / "cases"))
    monkeypatch.setattr(settings, "MASK_KEY", None)
    yield settings


@pytest.fixture
def no_fsync(monkeypatch):
    """大批量写入的测试不等待落盘"""
    monkeypatch.setattr(os, "fsync", lambda fd: None)


@pytest.fixture
def bank(tmp_path) -> SnippetBankService:
    return SnippetBankService(tmp_path / "bank")


@pytest.fixture
def fix_snippet_body() -> str:
    return (FIXTURES / "snippets" / "extact_fix.css").read_text(encoding="utf-8")


@pytest.fixture
def curated_fix(bank, fix_snippet_body):
    """REQ-21890 的修复片段，审核入库后为 SNIP-000001"""
    snippet = bank.add_snippet({
        "title": "Full-width extActAttributes inputs",
        "language_tag": "css",
        "keywords": ["extactattributes", "width", "resize"],
        "guideline_ids": ["REQ-21890"],
        "body": fix_snippet_body,
    })
    return bank.curate(snippet.snippet_id, approve=True)


@pytest.fixture
def memory_db() -> MetricDb:
    return MetricDb(None)


@pytest.fixture
def db_path(tmp_path) -> Path:
    return tmp_path / "metric.db"


def make_record(contribution_id: str, participant_id: str = "P-001", task_id: str = "T-1",
                snippet_ids=(), status: ContributionStatus = ContributionStatus.APPROVED,
                assigned: str = "2024-01-01T09:00:00", started: str = "2024-01-02T09:00:00",
                submitted: str = "2024-01-04T09:00:00", approved: str = "2024-01-05T09:00:00",
                loc=(10, 0, 0), commits: int = 1) -> ContributionRecord:
    return ContributionRecord(
        contribution_id=contribution_id,
        participant_id=participant_id,
        task_id=task_id,
        snippet_ids_used=list(snippet_ids),
        loc_added=loc[0],
        loc_updated=loc[1],
        loc_deleted=loc[2],
        commit_count=commits,
        assigned_at=datetime.fromisoformat(assigned),
        started_at=datetime.fromisoformat(started),
        submitted_at=datetime.fromisoformat(submitted),
        approved_at=datetime.fromisoformat(approved) if status == ContributionStatus.APPROVED else None,
        status=status,
    )


def make_scorecard(contribution_id: str, score: int = 4, productivity=None,
                   snippet_use: SnippetUse = SnippetUse.NONE, reviewer: str = "R-01") -> Scorecard:
    return Scorecard(
        contribution_id=contribution_id,
        reviewer_id=reviewer,
        category_scores={category: score for category in ReviewCategory},
        productivity_points=productivity,
        snippet_use=snippet_use,
    )
