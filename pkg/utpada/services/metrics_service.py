import csv
import io
import logging
from datetime import date, datetime, timezone
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

import numpy
from pydantic import ValidationError

from utpada.config import settings
from utpada.core.exceptions import MalformedCheckin, MixedParticipants, NoClasses, UnbalancedBraces
from utpada.models.analyzer_dto import LineSpan, SourceFile, SourceTree
from utpada.models.metrics_dto import (
    TOPLEVEL_CLASS,
    AgileMetrics,
    CheckinBatch,
    ClassMetrics,
    CodeQualityMetrics,
    ContributionRecord,
    ContributionStatus,
    FileMetrics,
    FunctionMetrics,
    NestedBlockDepth,
    RecordTiming,
    SprintMetrics,
)
from utpada.models.schemas_dto import Diagnostic
from utpada.utils.brace_scanner import (
    CLASS,
    FUNCTION,
    Block,
    count_decisions,
    descendants,
    enclosing,
    find_dead_code,
    scan_blocks,
)
from utpada.utils.source_normalizer import BRACE_LANGUAGES, mask_code
from utpada.utils.workdays import sprint_bounds, sprint_index, to_date, working_days_between

logger = logging.getLogger(__name__)

CHECKIN_COLUMNS = (
    "contribution_id", "participant_id", "task_id", "snippet_ids",
    "loc_added", "loc_updated", "loc_deleted", "commit_count",
    "assigned_at", "started_at", "submitted_at", "approved_at", "status",
)
_INT_COLUMNS = ("loc_added", "loc_updated", "loc_deleted", "commit_count")
_TIMESTAMP_COLUMNS = ("assigned_at", "started_at", "submitted_at", "approved_at")
ABSENT = "-"


def _scan(source: SourceFile) -> Tuple[str, Tuple[Block, ...]]:
    def compute() -> Tuple[str, Tuple[Block, ...]]:
        masked = mask_code(source.raw_text, source.language_tag)
        return masked, tuple(scan_blocks(masked, source.path))
    return source.derive("blocks", compute)


def _non_blank_lines(masked: str, start_line: int, end_line: int) -> int:
    lines = masked.split("\n")[start_line - 1:end_line]
    return sum(1 for line in lines if line.strip())


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 日期或日期时间；带时区的统一换算成不带时区的 UTC"""
    parsed = datetime.fromisoformat(value.strip())
    if parsed.tzinfo is not None:
        parsed = parsed.astimezone(timezone.utc).replace(tzinfo=None)
    return parsed


class MetricsService:
    """代码质量指标（嵌套深度、WMC、WACC、死代码）与敏捷指标（前置/周期时间、速率、吞吐）"""

    # ==================== 代码质量 ====================

    @classmethod
    def _require_braces(cls, source: SourceFile) -> Tuple[str, List[Block]]:
        if source.language_tag not in BRACE_LANGUAGES:
            raise ValueError(f"{source.path}: {source.language_tag} 不是花括号语言")
        masked, blocks = _scan(source)
        return masked, list(blocks)

    @classmethod
    def _outermost_functions(cls, blocks: List[Block]) -> List[int]:
        return [
            index for index, block in enumerate(blocks)
            if block.kind == FUNCTION and enclosing(blocks, index, FUNCTION) is None
        ]

    @classmethod
    def _function_rows(cls, masked: str, blocks: List[Block]) -> List[FunctionMetrics]:
        rows = []
        for index in cls._outermost_functions(blocks):
            function = blocks[index]
            depth = 1
            for child in descendants(blocks, index):
                depth = max(depth, blocks[child].depth - function.depth + 1)
            owner = enclosing(blocks, index, CLASS)
            rows.append(FunctionMetrics(
                name=function.name,
                class_name=blocks[owner].name if owner is not None else TOPLEVEL_CLASS,
                start_line=function.open_line,
                end_line=function.close_line,
                depth=depth,
                complexity=1 + count_decisions(masked, blocks, index),
                loc=_non_blank_lines(masked, function.open_line, function.close_line),
            ))
        return rows

    @classmethod
    def nested_block_depth(cls, source: SourceFile) -> NestedBlockDepth:
        """
        每个最外层函数的最大嵌套深度（函数体本身为 1）以及文件最大值

        文件有块但没有函数时，文件最大值取原始花括号深度。

        Raises:
            UnbalancedBraces: 花括号不匹配
        """
        masked, blocks = cls._require_braces(source)
        functions = cls._function_rows(masked, blocks)
        if functions:
            max_depth = max(row.depth for row in functions)
        else:
            max_depth = max((block.depth for block in blocks), default=0)
        return NestedBlockDepth(path=source.path, functions=functions, max_depth=max_depth)

    @classmethod
    def wmc(cls, source: SourceFile) -> List[ClassMetrics]:
        """
        每个类的 WMC（方法复杂度之和），类外函数归入 <toplevel>

        Raises:
            UnbalancedBraces: 花括号不匹配
        """
        masked, blocks = cls._require_braces(source)
        return cls._class_rows(masked, blocks, cls._function_rows(masked, blocks))

    @classmethod
    def _class_rows(cls, masked: str, blocks: List[Block],
                    functions: List[FunctionMetrics]) -> List[ClassMetrics]:
        rows: Dict[int, ClassMetrics] = {}
        for index, block in enumerate(blocks):
            if block.kind == CLASS and enclosing(blocks, index, FUNCTION) is None:
                rows[index] = ClassMetrics(
                    class_name=block.name,
                    start_line=block.open_line,
                    loc=_non_blank_lines(masked, block.open_line, block.close_line),
                )
        toplevel = ClassMetrics(class_name=TOPLEVEL_CLASS)

        for index, function in zip(cls._outermost_functions(blocks), functions):
            owner = enclosing(blocks, index, CLASS)
            row = rows[owner] if owner is not None else toplevel
            row.methods += 1
            row.wmc += function.complexity
            if owner is None:
                row.loc += function.loc

        result = [rows[key] for key in sorted(rows)]
        if toplevel.methods:
            result.append(toplevel)
        return result

    @classmethod
    def wacc(cls, rows: Iterable[ClassMetrics]) -> Fraction:
        """
        WACC = Σ(wmc × loc) / Σ(loc)

        Raises:
            NoClasses: 没有类，或总 loc 为 0
        """
        rows = list(rows)
        total_loc = sum(row.loc for row in rows)
        if not rows or total_loc == 0:
            raise NoClasses("没有可计算 WACC 的类")
        return Fraction(sum(row.wmc * row.loc for row in rows), total_loc)

    @classmethod
    def dead_code(cls, source: SourceFile) -> List[LineSpan]:
        """同一块内无条件 return/throw/break/continue 之后的语句"""
        if source.language_tag not in BRACE_LANGUAGES:
            return []
        masked, _ = cls._require_braces(source)
        return [LineSpan(start=start, end=end) for start, end in find_dead_code(masked)]

    @classmethod
    def file_metrics(cls, source: SourceFile) -> Tuple[FileMetrics, List[Diagnostic]]:
        try:
            masked, blocks = cls._require_braces(source)
        except UnbalancedBraces as e:
            logger.warning(f"花括号不匹配，跳过指标计算: {e}")
            return (
                FileMetrics(path=source.path, language_tag=source.language_tag, available=False),
                [Diagnostic(code="UnbalancedBraces", path=source.path, message=e.message)],
            )
        functions = cls._function_rows(masked, blocks)
        depth = cls.nested_block_depth(source).max_depth if blocks else None
        return FileMetrics(
            path=source.path,
            language_tag=source.language_tag,
            nested_block_depth=depth,
            functions=functions,
            classes=cls._class_rows(masked, blocks, functions),
            dead_code=cls.dead_code(source),
            loc=_non_blank_lines(masked, 1, masked.count("\n") + 1),
        ), []

    @classmethod
    def code_quality(cls, tree: SourceTree) -> CodeQualityMetrics:
        """对源码树中所有花括号语言文件计算代码质量指标"""
        files: List[FileMetrics] = []
        diagnostics: List[Diagnostic] = list(tree.diagnostics)
        for source in tree.files:
            if source.language_tag not in BRACE_LANGUAGES:
                continue
            metrics, problems = cls.file_metrics(source)
            files.append(metrics)
            diagnostics.extend(problems)

        depths = [f.nested_block_depth for f in files if f.nested_block_depth is not None]
        rows = [row for f in files for row in f.classes]
        try:
            wacc: Optional[float] = float(cls.wacc(rows))
        except NoClasses:
            wacc = None
        logger.info(f"代码质量指标 {tree.root}: {len(files)} 个文件, WACC={wacc}")
        return CodeQualityMetrics(
            root=tree.root,
            files=files,
            nested_block_depth=max(depths) if depths else None,
            wacc=wacc,
            diagnostics=diagnostics,
        )

    # ==================== 提交记录 ====================

    @classmethod
    def parse_checkins(cls, text: str) -> CheckinBatch:
        """
        解析提交记录导出文件（制表符分隔，首行为表头）

        列数或数值格式错误直接失败；时间无法解析、时间顺序不一致或ID重复的记录跳过并记诊断。

        Raises:
            MalformedCheckin: 表头或行格式错误，附带行号
        """
        reader = csv.reader(io.StringIO(text), delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None or tuple(column.strip() for column in header) != CHECKIN_COLUMNS:
            raise MalformedCheckin(f"表头必须为: {' '.join(CHECKIN_COLUMNS)}", line=1)

        batch = CheckinBatch()
        seen = set()
        for row in reader:
            line = reader.line_num
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(CHECKIN_COLUMNS):
                raise MalformedCheckin(f"应有 {len(CHECKIN_COLUMNS)} 列，实际 {len(row)} 列", line=line)
            fields = dict(zip(CHECKIN_COLUMNS, (cell.strip() for cell in row)))

            values: Dict[str, object] = {}
            for column in _INT_COLUMNS:
                if not (fields[column].isascii() and fields[column].isdigit()):
                    raise MalformedCheckin(f"{column} 必须是非负整数: {fields[column]!r}", line=line)
                values[column] = int(fields[column])
            try:
                values["status"] = ContributionStatus(fields["status"])
            except ValueError:
                raise MalformedCheckin(f"未知状态: {fields['status']!r}", line=line)

            record_id = fields["contribution_id"]
            try:
                for column in _TIMESTAMP_COLUMNS:
                    raw = fields[column]
                    values[column] = None if raw == ABSENT and column == "approved_at" else parse_timestamp(raw)
            except ValueError as e:
                batch.diagnostics.append(Diagnostic(code="InvalidTimestamps", record_id=record_id,
                                                    message=f"第 {line} 行时间格式错误: {e}"))
                continue

            snippet_ids = fields["snippet_ids"]
            try:
                record = ContributionRecord(
                    contribution_id=record_id,
                    participant_id=fields["participant_id"],
                    task_id=fields["task_id"],
                    snippet_ids_used=[] if snippet_ids == ABSENT else [s.strip() for s in snippet_ids.split(",") if s.strip()],
                    **values,
                )
            except ValidationError as e:
                raise MalformedCheckin(e.errors()[0]["msg"], line=line)
            problems = record.timestamp_problems()
            if problems:
                batch.diagnostics.append(Diagnostic(code="InvalidTimestamps", record_id=record_id,
                                                    message=f"第 {line} 行: {'; '.join(problems)}"))
                continue
            if record_id in seen:
                batch.diagnostics.append(Diagnostic(code="DuplicateRecord", record_id=record_id,
                                                    message=f"第 {line} 行: 贡献记录ID重复，已跳过"))
                continue
            seen.add(record_id)
            batch.records.append(record)

        for diagnostic in batch.diagnostics:
            logger.warning(f"跳过提交记录 {diagnostic.record_id}: {diagnostic.message}")
        logger.info(f"解析提交记录: {len(batch.records)} 条, 跳过 {len(batch.diagnostics)} 条")
        return batch

    # ==================== 敏捷指标 ====================

    @classmethod
    def record_timing(cls, record: ContributionRecord, sprint: Optional[int] = None) -> RecordTiming:
        lead = cycle = None
        if record.approved_at is not None:
            lead = working_days_between(record.assigned_at, record.approved_at)
            cycle = working_days_between(record.started_at, record.approved_at)
        return RecordTiming(contribution_id=record.contribution_id, task_id=record.task_id,
                            status=record.status, lead_time_days=lead, cycle_time_days=cycle, sprint=sprint)

    @classmethod
    def agile_metrics(cls, records: List[ContributionRecord], sprint_start: date,
                      sprint_days: Optional[int] = None) -> AgileMetrics:
        """
        按冲刺窗口汇总敏捷指标

        审核通过的记录按 approved_at 归入冲刺（速率、吞吐、前置/周期时间均值），
        代码行和提交次数按 submitted_at 归入冲刺；submitted_at 早于起始日的记录跳过。

        Raises:
            MixedParticipants: 记录属于多个参与者
        """
        sprint_days = sprint_days or settings.SPRINT_WORKING_DAYS
        sprint_start = to_date(sprint_start)
        participants = sorted({record.participant_id for record in records})
        if len(participants) > 1:
            raise MixedParticipants(f"记录属于多个参与者: {', '.join(participants)}")

        diagnostics: List[Diagnostic] = []
        timings: List[RecordTiming] = []
        buckets: Dict[int, dict] = {}

        def bucket(index: int) -> dict:
            return buckets.setdefault(index, {"tasks": set(), "dt": 0, "lc": 0, "commits": 0,
                                              "lead": [], "cycle": []})

        for record in sorted(records, key=lambda r: (r.submitted_at, r.contribution_id)):
            problems = record.timestamp_problems()
            if problems:
                diagnostics.append(Diagnostic(code="InvalidTimestamps", record_id=record.contribution_id,
                                              message="; ".join(problems)))
                continue
            submitted_sprint = sprint_index(record.submitted_at, sprint_start, sprint_days)
            if submitted_sprint < 0:
                diagnostics.append(Diagnostic(code="BeforeSprintStart", record_id=record.contribution_id,
                                              message=f"提交时间早于冲刺起始日 {sprint_start}"))
                continue

            row = bucket(submitted_sprint)
            row["lc"] += record.lines_changed
            row["commits"] += record.commit_count

            approved_sprint = None
            timing = cls.record_timing(record)
            if record.status == ContributionStatus.APPROVED:
                approved_sprint = sprint_index(record.approved_at, sprint_start, sprint_days)
                row = bucket(approved_sprint)
                row["tasks"].add(record.task_id)
                row["dt"] += 1
                row["lead"].append(timing.lead_time_days)
                row["cycle"].append(timing.cycle_time_days)
            timings.append(timing.model_copy(update={"sprint": approved_sprint}))

        sprints = []
        for index in range(max(buckets) + 1 if buckets else 0):
            row = buckets.get(index) or bucket(index)
            first, last = sprint_bounds(index, sprint_start, sprint_days)
            sprints.append(SprintMetrics(
                index=index,
                start=first,
                end=last,
                velocity=len(row["tasks"]),
                deliverable_throughput=row["dt"],
                lines_changed=row["lc"],
                commit_count=row["commits"],
                lead_time_days=float(numpy.mean(row["lead"])) if row["lead"] else None,
                cycle_time_days=float(numpy.mean(row["cycle"])) if row["cycle"] else None,
            ))

        timings.sort(key=lambda t: t.contribution_id)
        return AgileMetrics(
            participant_id=participants[0] if participants else None,
            sprint_start=sprint_start,
            sprint_days=sprint_days,
            sprints=sprints,
            records=timings,
            diagnostics=diagnostics,
        )
