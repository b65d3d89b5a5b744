from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


class ReviewCategory(str, Enum):
    """代码评审表的 8 个类别"""
    IMPLEMENTATION = "implementation"
    DEPENDENCIES = "dependencies"
    SECURITY = "security"
    LOGIC_ERRORS = "logic_errors"
    ERROR_HANDLING = "error_handling"
    USABILITY_ACCESSIBILITY = "usability_accessibility"
    PERFORMANCE = "performance"
    READABILITY = "readability"


MAX_CATEGORY_SCORE = 5
REVIEW_POINTS = 50
PRODUCTIVITY_POINTS = 50


class SnippetUse(str, Enum):
    APPROPRIATE = "appropriate"
    INAPPROPRIATE = "inappropriate"
    NONE = "none"


class Scorecard(BaseModel):
    """评审人填写的评分卡；productivity_points 为空时由工具根据指标计算"""
    contribution_id: str = Field(..., min_length=1)
    reviewer_id: str = Field(..., min_length=1, description="评审人（可脱敏）")
    category_scores: Dict[ReviewCategory, int] = Field(..., description="每个类别 0-5 分")
    productivity_points: Optional[float] = Field(None, ge=0, le=PRODUCTIVITY_POINTS)
    snippet_use: SnippetUse = SnippetUse.NONE
    notes: str = ""

    @field_validator("category_scores")
    @classmethod
    def validate_scores(cls, v):
        for category, score in v.items():
            if not 0 <= score <= MAX_CATEGORY_SCORE:
                raise ValueError(f"{category.value} 的分数必须在 0-{MAX_CATEGORY_SCORE} 之间: {score}")
        missing = [c.value for c in ReviewCategory if c not in v]
        if missing:
            raise ValueError(f"缺少评审类别: {', '.join(missing)}")
        return v


class RsiScore(BaseModel):
    contribution_id: Optional[str] = None
    review_points: float = Field(..., ge=0, le=REVIEW_POINTS)
    productivity_points: float = Field(..., ge=0, le=PRODUCTIVITY_POINTS)
    total_100: float = Field(..., ge=0, le=100)
    value_10: float = Field(..., ge=0, le=10, description="total_100 / 10，未舍入")
    rounded_10: float = Field(..., description="四舍五入到 1 位小数，用于展示")
    passed: bool = Field(..., description="value_10 >= 基准线")


class ProductivityBenchmarks(BaseModel):
    """把原始指标换算成生产力分数的目标值"""
    dt_per_sprint: float = Field(..., gt=0, description="每个冲刺的交付数")
    lc_per_sprint: float = Field(..., gt=0, description="每个冲刺的改动行数")
    max_nbd: float = Field(..., gt=0, description="嵌套块深度上限")
    max_wacc: float = Field(..., gt=0, description="WACC 上限")
    lead_time_days: float = Field(..., gt=0, description="前置时间目标（工作日）")


class ProductivityInputs(BaseModel):
    """为空表示没有测量值（该指标得 0 分）"""
    dt_per_sprint: Optional[float] = Field(None, ge=0)
    lc_per_sprint: Optional[float] = Field(None, ge=0)
    nbd: Optional[float] = Field(None, ge=0)
    wacc: Optional[float] = Field(None, ge=0)
    lead_time_days: Optional[float] = Field(None, ge=0)


class Classification(str, Enum):
    EXCEPTIONAL = "Exceptional"
    MODERATE = "Moderate"
    UNDERPERFORMER = "Underperformer"

    @property
    def rank(self) -> int:
        return {"Underperformer": 0, "Moderate": 1, "Exceptional": 2}[self.value]


RECOMMENDATIONS = {
    Classification.EXCEPTIONAL: "recommend early production transition (ref: 14-week average)",
    Classification.MODERATE: "continue probation (ref: 18–24 weeks)",
    Classification.UNDERPERFORMER: "review for non-development role or exit",
}


class ParticipantSummary(BaseModel):
    participant_id: str
    scorecard_count: int = Field(..., ge=1)
    mean_rsi: float = Field(..., ge=0, le=10)
    pass_rate: float = Field(..., ge=0, le=1)
    reliance_rate: Optional[float] = Field(None, ge=0, le=1, description="使用片段库的提交占比")
    classification: Classification
    recommendation: str


class ScoreResult(BaseModel):
    """review score 命令的输出"""
    scorecard: Scorecard
    rsi: RsiScore
    inputs: Optional[ProductivityInputs] = None
    sequence: Optional[int] = None
    warnings: List[str] = Field(default_factory=list)
