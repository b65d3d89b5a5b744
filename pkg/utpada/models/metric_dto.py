from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from utpada.models.analyzer_dto import CaseCounts, ValidationReport


class EventKind(str, Enum):
    VALIDATION_SUMMARY = "validation_summary"
    CONTRIBUTION = "contribution"
    SCORECARD = "scorecard"
    RSI_SCORE = "rsi_score"
    CURATION = "curation"


class MetricEvent(BaseModel):
    """Metric DB 中的一条事件，写入后不可修改"""
    seq: int = Field(..., ge=1, description="严格递增的序号")
    ts: datetime = Field(..., description="写入时间（UTC）")
    kind: EventKind
    data: Dict[str, Any]


class ValidationSummary(BaseModel):
    """一次验证执行的摘要（不保存逐文件 findings）"""
    run_id: str
    org: str = "default"
    generated_at: datetime
    cases_run: int
    files_scanned: int
    correct: int
    incorrect: int
    missing: int
    not_applicable: int
    counts: List[CaseCounts] = Field(default_factory=list)

    @classmethod
    def from_report(cls, report: ValidationReport, org: str = "default") -> "ValidationSummary":
        totals = report.totals
        return cls(
            run_id=report.run_id,
            org=org,
            generated_at=report.generated_at,
            cases_run=totals.cases_run,
            files_scanned=totals.files_scanned,
            correct=totals.correct,
            incorrect=totals.incorrect,
            missing=totals.missing,
            not_applicable=totals.not_applicable,
            counts=report.counts,
        )


class CurationEvent(BaseModel):
    snippet_id: str
    approved: bool
    curated_by: Optional[str] = None
