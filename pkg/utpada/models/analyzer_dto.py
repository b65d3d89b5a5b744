from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

from pydantic import BaseModel, Field, model_validator

from utpada.models.schemas_dto import Diagnostic
from utpada.utils.source_normalizer import Token

T = TypeVar("T")


@dataclass(frozen=True)
class SourceFile:
    """已归一化的源文件；tokens 由去注释后的原文切分得到"""
    path: str
    language_tag: str
    raw_text: str
    lines: Tuple[str, ...]
    tokens: Tuple[Token, ...]
    # 按需计算的派生结果（CSS 规则、屏蔽文本等），随文件对象一起释放
    derived: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False, hash=False)

    def derive(self, key: str, compute: Callable[[], T]) -> T:
        if key not in self.derived:
            self.derived[key] = compute()
        return self.derived[key]


@dataclass(frozen=True)
class SourceTree:
    root: str
    files: Tuple[SourceFile, ...]
    diagnostics: Tuple[Diagnostic, ...] = field(default_factory=tuple)

    def digest_parts(self) -> List[Tuple[str, str]]:
        return [(f.path, f.raw_text) for f in self.files]


class FindingStatus(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    MISSING = "Missing"
    NOT_APPLICABLE = "NotApplicable"


class LineSpan(BaseModel):
    start: int = Field(..., ge=1, description="起始行")
    end: int = Field(..., ge=1, description="结束行")


class ValidationFinding(BaseModel):
    case_id: str
    guideline_id: str
    path: str
    status: FindingStatus
    location: Optional[LineSpan] = Field(None, description="决定状态的首个匹配位置")
    match_count: int = Field(0, ge=0, description="决定状态的模式匹配总数")
    recommended_snippet_ids: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_status(self):
        if self.status in (FindingStatus.MISSING, FindingStatus.NOT_APPLICABLE) and self.location is not None:
            raise ValueError("Missing / NotApplicable 不能带匹配位置")
        if self.status in (FindingStatus.CORRECT, FindingStatus.NOT_APPLICABLE) and self.recommended_snippet_ids:
            raise ValueError("只有 Incorrect / Missing 才有推荐片段")
        return self


class CaseCounts(BaseModel):
    case_id: str
    guideline_id: str
    correct: int = 0
    incorrect: int = 0
    missing: int = 0
    not_applicable: int = 0

    @property
    def applicable(self) -> int:
        return self.correct + self.incorrect + self.missing


class ValidationTotals(BaseModel):
    cases_run: int
    files_scanned: int
    correct: int = 0
    incorrect: int = 0
    missing: int = 0
    not_applicable: int = 0


class ValidationReport(BaseModel):
    run_id: str = Field(..., description="用例集 + 源码树摘要 + 时间戳的哈希")
    generated_at: datetime
    case_set_digest: str
    tree_digest: str
    totals: ValidationTotals
    counts: List[CaseCounts]
    findings: List[ValidationFinding]
    diagnostics: List[Diagnostic] = Field(default_factory=list)

    @property
    def has_violations(self) -> bool:
        return self.totals.incorrect > 0 or self.totals.missing > 0

    def counts_by_case(self) -> Dict[str, CaseCounts]:
        return {row.case_id: row for row in self.counts}


class ValidationRunRequest(BaseModel):
    """HTTP 触发一次验证执行；目录是服务端路径"""
    source: str = Field(..., description="源码目录")
    cases: Optional[str] = Field(None, description="用例目录，默认取配置 CASES")
    org: str = Field("default", description="组织标签，用于质量趋势")
    record: bool = Field(False, description="是否把摘要写入 Metric DB")
