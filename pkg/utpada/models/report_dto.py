from datetime import date
from typing import List, Optional

from pydantic import BaseModel, Field

from utpada.models.metrics_dto import AgileMetrics
from utpada.models.rsi_dto import ParticipantSummary


class CohortTotals(BaseModel):
    contributions: int = 0
    bank_backed: int = Field(0, description="至少引用了一个库中片段的提交")
    appropriate: int = Field(0, description="使用片段库且评审认定用法恰当的提交")


class QualityTrendRow(BaseModel):
    """每个组织每个季度的质量趋势：fatal = Incorrect，trivial = Missing"""
    org: str
    period: str = Field(..., description="例如 2024-Q1")
    runs: int
    fatal: int
    trivial: int
    fatal_change_pct: Optional[float] = Field(None, description="相对上一季度的变化百分比")
    trivial_change_pct: Optional[float] = None


class CohortReport(BaseModel):
    totals: CohortTotals
    reliance_rate: Optional[float] = Field(None, description="bank_backed / contributions，分母为 0 时为空")
    correct_snippet_rate: Optional[float] = Field(None, description="appropriate / bank_backed，分母为 0 时为空")
    participants: List[ParticipantSummary] = Field(default_factory=list)
    quality_trend: List[QualityTrendRow] = Field(default_factory=list)


class SprintRsiRow(BaseModel):
    index: int
    start: date
    end: date
    count: int = 0
    mean_rsi: Optional[float] = None
    passed: int = 0


class ParticipantReport(BaseModel):
    participant_id: str
    contributions: int
    summary: Optional[ParticipantSummary] = Field(None, description="没有 RSI 记录时为空")
    series: List[SprintRsiRow] = Field(default_factory=list)
    agile: Optional[AgileMetrics] = None
