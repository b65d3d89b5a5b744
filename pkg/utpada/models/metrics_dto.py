from datetime import date, datetime
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from utpada.models.analyzer_dto import LineSpan
from utpada.models.schemas_dto import Diagnostic

TOPLEVEL_CLASS = "<toplevel>"


# ==================== 代码质量 ====================

class FunctionMetrics(BaseModel):
    """最外层函数（嵌套的 lambda / 局部函数算作所在函数的块）"""
    name: str
    class_name: str = Field(TOPLEVEL_CLASS, description="所属类，类外函数归入 <toplevel>")
    start_line: int
    end_line: int
    depth: int = Field(..., ge=1, description="最大嵌套块深度，函数体本身为 1")
    complexity: int = Field(..., ge=1, description="1 + 判定点数量")
    loc: int = Field(..., ge=0, description="非空行数")


class ClassMetrics(BaseModel):
    class_name: str
    start_line: Optional[int] = None
    methods: int = Field(0, ge=0, description="方法数")
    wmc: int = Field(0, ge=0, description="方法复杂度之和")
    loc: int = Field(0, ge=0)


class FileMetrics(BaseModel):
    path: str
    language_tag: str
    available: bool = Field(True, description="花括号不匹配时为 False，其余指标不可用")
    nested_block_depth: Optional[int] = Field(None, description="文件内最大嵌套深度")
    functions: List[FunctionMetrics] = Field(default_factory=list)
    classes: List[ClassMetrics] = Field(default_factory=list)
    dead_code: List[LineSpan] = Field(default_factory=list)
    loc: int = 0


class NestedBlockDepth(BaseModel):
    path: str
    functions: List[FunctionMetrics] = Field(default_factory=list)
    max_depth: int = Field(0, ge=0, description="没有任何块时为 0")


class CodeQualityMetrics(BaseModel):
    root: str
    files: List[FileMetrics] = Field(default_factory=list)
    nested_block_depth: Optional[int] = Field(None, description="全部文件的最大嵌套深度")
    wacc: Optional[float] = Field(None, description="按 loc 加权的类复杂度均值，没有类时为空")
    diagnostics: List[Diagnostic] = Field(default_factory=list)

    @property
    def class_rows(self) -> List[ClassMetrics]:
        return [row for f in self.files for row in f.classes]


# ==================== 贡献记录 ====================

class ContributionStatus(str, Enum):
    APPROVED = "Approved"
    REWORK = "Rework"
    REJECTED = "Rejected"


class ContributionRecord(BaseModel):
    """一次新员工代码提交（时间统一为不带时区的 UTC）"""
    contribution_id: str = Field(..., min_length=1)
    participant_id: str = Field(..., min_length=1)
    task_id: str = Field(..., min_length=1)
    snippet_ids_used: List[str] = Field(default_factory=list)
    loc_added: int = Field(0, ge=0)
    loc_updated: int = Field(0, ge=0)
    loc_deleted: int = Field(0, ge=0)
    commit_count: int = Field(0, ge=0)
    assigned_at: datetime
    started_at: datetime
    submitted_at: datetime
    approved_at: Optional[datetime] = None
    status: ContributionStatus

    @property
    def lines_changed(self) -> int:
        return self.loc_added + self.loc_updated + self.loc_deleted

    def timestamp_problems(self) -> List[str]:
        """时间顺序与状态一致性检查，返回问题描述列表"""
        problems = []
        if self.started_at < self.assigned_at:
            problems.append("started_at 早于 assigned_at")
        if self.submitted_at < self.started_at:
            problems.append("submitted_at 早于 started_at")
        if self.approved_at is not None and self.approved_at < self.submitted_at:
            problems.append("approved_at 早于 submitted_at")
        if (self.status == ContributionStatus.APPROVED) != (self.approved_at is not None):
            problems.append("只有 Approved 状态才有 approved_at")
        return problems


class CheckinBatch(BaseModel):
    records: List[ContributionRecord] = Field(default_factory=list)
    diagnostics: List[Diagnostic] = Field(default_factory=list)


# ==================== 敏捷指标 ====================

class RecordTiming(BaseModel):
    contribution_id: str
    task_id: str
    status: ContributionStatus
    lead_time_days: Optional[int] = Field(None, description="assigned_at 到 approved_at 的工作日数")
    cycle_time_days: Optional[int] = Field(None, description="started_at 到 approved_at 的工作日数")
    sprint: Optional[int] = Field(None, description="按 approved_at 归属的冲刺")


class SprintMetrics(BaseModel):
    index: int = Field(..., ge=0)
    start: date
    end: date
    velocity: int = Field(0, ge=0, description="审核通过的不同任务数")
    deliverable_throughput: int = Field(0, ge=0, description="审核通过的提交数")
    lines_changed: int = Field(0, ge=0)
    commit_count: int = Field(0, ge=0)
    lead_time_days: Optional[float] = None
    cycle_time_days: Optional[float] = None


class AgileMetrics(BaseModel):
    participant_id: Optional[str] = None
    sprint_start: date
    sprint_days: int
    sprints: List[SprintMetrics] = Field(default_factory=list)
    records: List[RecordTiming] = Field(default_factory=list)
    diagnostics: List[Diagnostic] = Field(default_factory=list)
