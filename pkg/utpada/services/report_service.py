import logging
from collections import defaultdict
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from utpada.config import settings
from utpada.core.exceptions import UnknownParticipant
from utpada.database.metric_db import MetricDb
from utpada.models.metric_dto import EventKind, MetricEvent
from utpada.models.metrics_dto import ContributionRecord
from utpada.models.report_dto import (
    CohortReport,
    CohortTotals,
    ParticipantReport,
    QualityTrendRow,
    SprintRsiRow,
)
from utpada.models.rsi_dto import SnippetUse
from utpada.models.valcase_dto import SNIPPET_ID_RE
from utpada.services.metrics_service import MetricsService
from utpada.services.rsi_service import RsiService
from utpada.services.snippet_service import SnippetBankService
from utpada.tools.security import IdMasker
from utpada.utils.workdays import sprint_bounds, sprint_index, to_date

logger = logging.getLogger(__name__)


def _rate(numerator: int, denominator: int) -> Optional[float]:
    return float(Fraction(numerator, denominator)) if denominator else None


def _change_pct(current: int, previous: Optional[int]) -> Optional[float]:
    if not previous:
        return None
    return round((current - previous) / previous * 100, 2)


class ReportService:
    """从 Metric DB 的原始事件重新计算群体报告和个人报告（不缓存任何比率）"""

    @classmethod
    def _resolver(cls, bank: Optional[SnippetBankService]) -> Callable[[str], bool]:
        """片段ID能否在库中解析；没有提供片段库时只检查ID格式"""
        if bank is None:
            return lambda snippet_id: bool(SNIPPET_ID_RE.match(snippet_id))
        return bank.exists

    @classmethod
    def _bank_backed(cls, record: ContributionRecord, resolves: Callable[[str], bool]) -> bool:
        return any(resolves(snippet_id) for snippet_id in record.snippet_ids_used)

    @classmethod
    def cohort_report(cls, db: MetricDb, bank: Optional[SnippetBankService] = None) -> CohortReport:
        """
        群体报告

        reliance_rate = 使用片段库的提交 / 全部提交；
        correct_snippet_rate = 评审认定片段用法恰当的提交 / 使用片段库的提交。
        """
        resolves = cls._resolver(bank)
        totals = CohortTotals()
        per_participant: Dict[str, List[int]] = defaultdict(lambda: [0, 0])

        for contribution_id in sorted(db.contributions):
            record = db.contributions[contribution_id]
            backed = cls._bank_backed(record, resolves)
            totals.contributions += 1
            per_participant[record.participant_id][0] += 1
            if not backed:
                continue
            totals.bank_backed += 1
            per_participant[record.participant_id][1] += 1
            card = db.scorecards.get(contribution_id)
            if card is not None and card.snippet_use == SnippetUse.APPROPRIATE:
                totals.appropriate += 1

        participants = []
        for participant_id in db.participants():
            history = [
                db.rsi_scores[record.contribution_id]
                for record in db.records_of(participant_id)
                if record.contribution_id in db.rsi_scores
            ]
            if not history:
                continue
            total, backed = per_participant[participant_id]
            participants.append(RsiService.classify_participant(
                history, reliance=_rate(backed, total), participant_id=participant_id))

        report = CohortReport(
            totals=totals,
            reliance_rate=_rate(totals.bank_backed, totals.contributions),
            correct_snippet_rate=_rate(totals.appropriate, totals.bank_backed),
            participants=participants,
            quality_trend=cls.quality_trend(db),
        )
        logger.info(
            f"群体报告: {totals.contributions} 个提交, 使用片段库 {totals.bank_backed}, "
            f"用法恰当 {totals.appropriate}"
        )
        return report

    @classmethod
    def quality_trend(cls, db: MetricDb) -> List[QualityTrendRow]:
        """按组织、按季度汇总验证结果，并计算相对上一季度的变化"""
        groups: Dict[Tuple[str, int, int], List[int]] = defaultdict(lambda: [0, 0, 0])
        for summary in db.validation_summaries():
            quarter = (summary.generated_at.month - 1) // 3 + 1
            row = groups[(summary.org, summary.generated_at.year, quarter)]
            row[0] += 1
            row[1] += summary.incorrect
            row[2] += summary.missing

        rows: List[QualityTrendRow] = []
        previous: Dict[str, Tuple[int, int, int]] = {}
        for org, year, quarter in sorted(groups):
            runs, fatal, trivial = groups[(org, year, quarter)]
            prior = previous.get(org)
            is_adjacent = prior is not None and prior[0] == year * 4 + quarter - 1
            rows.append(QualityTrendRow(
                org=org,
                period=f"{year}-Q{quarter}",
                runs=runs,
                fatal=fatal,
                trivial=trivial,
                fatal_change_pct=_change_pct(fatal, prior[1]) if is_adjacent else None,
                trivial_change_pct=_change_pct(trivial, prior[2]) if is_adjacent else None,
            ))
            previous[org] = (year * 4 + quarter, fatal, trivial)
        return rows

    @classmethod
    def participant_report(cls, db: MetricDb, participant_id: str,
                           sprint_start: Optional[date] = None,
                           sprint_days: Optional[int] = None,
                           bank: Optional[SnippetBankService] = None) -> ParticipantReport:
        """
        个人报告：按冲刺分组的 RSI 序列 + 分类结论 + 敏捷指标

        RSI 按对应提交的 submitted_at 归入冲刺；冲刺默认从最早的 assigned_at 开始。

        Raises:
            UnknownParticipant: Metric DB 中没有该参与者的提交
        """
        records = db.records_of(participant_id)
        if not records:
            raise UnknownParticipant(participant_id)
        sprint_days = sprint_days or settings.SPRINT_WORKING_DAYS
        start = to_date(sprint_start) if sprint_start else min(to_date(r.assigned_at) for r in records)

        buckets: Dict[int, list] = defaultdict(list)
        history = []
        for record in records:
            score = db.rsi_scores.get(record.contribution_id)
            if score is None:
                continue
            history.append(score)
            index = sprint_index(record.submitted_at, start, sprint_days)
            if index >= 0:
                buckets[index].append(score)

        series = []
        for index in range(max(buckets) + 1 if buckets else 0):
            scores = buckets.get(index, [])
            first, last = sprint_bounds(index, start, sprint_days)
            series.append(SprintRsiRow(
                index=index,
                start=first,
                end=last,
                count=len(scores),
                mean_rsi=float(sum(Fraction(str(s.value_10)) for s in scores) / len(scores)) if scores else None,
                passed=sum(1 for s in scores if s.passed),
            ))

        resolves = cls._resolver(bank)
        backed = sum(1 for record in records if cls._bank_backed(record, resolves))
        summary = None
        if history:
            summary = RsiService.classify_participant(
                history, reliance=_rate(backed, len(records)), participant_id=participant_id)

        return ParticipantReport(
            participant_id=participant_id,
            contributions=len(records),
            summary=summary,
            series=series,
            agile=MetricsService.agile_metrics(records, start, sprint_days),
        )

    @classmethod
    def mask(cls, db: MetricDb, key: str, out_path: Union[str, Path]) -> int:
        """
        写出一份脱敏副本：参与者ID和评审人ID替换为 HMAC 标记

        Returns:
            int: 写出的事件数
        """
        masker = IdMasker(key)

        def transform(event: MetricEvent) -> MetricEvent:
            data = dict(event.data)
            if event.kind == EventKind.CONTRIBUTION:
                data["participant_id"] = masker.mask(data["participant_id"])
            elif event.kind == EventKind.SCORECARD:
                data["reviewer_id"] = masker.mask(data["reviewer_id"])
            return event.model_copy(update={"data": data})

        return db.rewrite(out_path, transform)
