import logging
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Type, Union

from pydantic import ValidationError

from utpada.config import settings
from utpada.core.exceptions import (
    EmptyHistory,
    MalformedScorecard,
    MissingBenchmarks,
    MissingCategory,
    UtpadaError,
)
from utpada.models.metrics_dto import AgileMetrics, CodeQualityMetrics
from utpada.models.rsi_dto import (
    MAX_CATEGORY_SCORE,
    PRODUCTIVITY_POINTS,
    RECOMMENDATIONS,
    REVIEW_POINTS,
    Classification,
    ParticipantSummary,
    ProductivityBenchmarks,
    ProductivityInputs,
    ReviewCategory,
    RsiScore,
    Scorecard,
    SnippetUse,
)

logger = logging.getLogger(__name__)

INDICATOR_MAX = 10
INDICATOR_AT_TARGET = 5
SCORE_PREFIX = "score."
BENCHMARK_KEYS = ("dt_per_sprint", "lc_per_sprint", "max_nbd", "max_wacc", "lead_time_days")


def exact(value: Union[int, float, str, Fraction]) -> Fraction:
    """按十进制字面值转换，0.9 得到 9/10 而不是二进制近似值"""
    if isinstance(value, Fraction):
        return value
    return Fraction(str(value))


def _clamp(value: Fraction, low: int, high: int) -> Fraction:
    return max(Fraction(low), min(Fraction(high), value))


def _read_key_values(text: str, error: Type[UtpadaError], separators: str = ":") -> Dict[str, str]:
    """逐行 key<sep>value，忽略空行和 # 注释；重复的 key 报错"""
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        positions = [stripped.find(sep) for sep in separators if sep in stripped]
        if not positions:
            raise error(f"第 {number} 行缺少分隔符: {stripped!r}")
        cut = min(positions)
        key, value = stripped[:cut].strip(), stripped[cut + 1:].strip()
        if key in values:
            raise error(f"第 {number} 行: 重复的字段 {key}")
        values[key] = value
    return values


class RsiService:
    """评审满意度指数（RSI）：评审分 50 + 生产力分 50，满分 100，折算为 10 分制"""

    @classmethod
    def review_points(cls, category_scores: Mapping[Union[ReviewCategory, str], int],
                      weights: Optional[Mapping[str, float]] = None) -> Fraction:
        """
        评审分（0-50）

        默认 8 个类别等权，即 Σ分数 / 40 × 50。

        Raises:
            MissingCategory: 缺少类别
        """
        scores = {ReviewCategory(key): value for key, value in category_scores.items()}
        missing = [c.value for c in ReviewCategory if c not in scores]
        if missing:
            raise MissingCategory(f"缺少评审类别: {', '.join(missing)}")
        weights = weights if weights is not None else settings.REVIEW_CATEGORY_WEIGHTS
        weight = {c: exact(weights.get(c.value, 1)) for c in ReviewCategory}
        total_weight = sum(weight.values())
        if total_weight <= 0:
            raise ValueError("评审类别权重之和必须为正数")
        earned = sum(weight[c] * Fraction(scores[c], MAX_CATEGORY_SCORE) for c in ReviewCategory)
        return earned / total_weight * REVIEW_POINTS

    @classmethod
    def indicator_scores(cls, raw: ProductivityInputs, bench: ProductivityBenchmarks) -> Dict[str, Fraction]:
        """
        每个指标 0-10 分：吞吐类为 5 × 实际/目标，成本类为 5 × 目标/实际，截断到 [0, 10]

        没有测量值的指标得 0 分；成本类指标实测为 0 时得满分。
        """
        def throughput(actual: Optional[float], target: float) -> Fraction:
            if actual is None:
                return Fraction(0)
            return _clamp(INDICATOR_AT_TARGET * exact(actual) / exact(target), 0, INDICATOR_MAX)

        def cost(actual: Optional[float], target: float) -> Fraction:
            if actual is None:
                return Fraction(0)
            if actual == 0:
                return Fraction(INDICATOR_MAX)
            return _clamp(INDICATOR_AT_TARGET * exact(target) / exact(actual), 0, INDICATOR_MAX)

        return {
            "dt_per_sprint": throughput(raw.dt_per_sprint, bench.dt_per_sprint),
            "lc_per_sprint": throughput(raw.lc_per_sprint, bench.lc_per_sprint),
            "nbd": cost(raw.nbd, bench.max_nbd),
            "wacc": cost(raw.wacc, bench.max_wacc),
            "lead_time_days": cost(raw.lead_time_days, bench.lead_time_days),
        }

    @classmethod
    def productivity_points(cls, raw: ProductivityInputs,
                            bench: Optional[ProductivityBenchmarks]) -> Fraction:
        """
        生产力分（0-50）= 5 个指标得分的均值 × 5

        Raises:
            MissingBenchmarks: 没有基准值
        """
        if bench is None:
            raise MissingBenchmarks("计算生产力分需要基准值（benchmarks.cfg）")
        scores = cls.indicator_scores(raw, bench)
        mean = sum(scores.values()) / len(scores)
        return _clamp(mean * PRODUCTIVITY_POINTS / INDICATOR_MAX, 0, PRODUCTIVITY_POINTS)

    @classmethod
    def productivity_inputs(cls, agile: Optional[AgileMetrics], quality: Optional[CodeQualityMetrics] = None,
                            sprint: Optional[int] = None) -> ProductivityInputs:
        """
        从冲刺指标和代码质量指标整理生产力输入

        指定 sprint 时取该冲刺的数值，否则取全部冲刺的均值。
        """
        dt = lc = lead = None
        if agile is not None and agile.sprints:
            sprints = agile.sprints
            if sprint is not None:
                sprints = [row for row in agile.sprints if row.index == sprint]
            if sprints:
                dt = sum(row.deliverable_throughput for row in sprints) / len(sprints)
                lc = sum(row.lines_changed for row in sprints) / len(sprints)
                leads = [row.lead_time_days for row in sprints if row.lead_time_days is not None]
                lead = sum(leads) / len(leads) if leads else None
        return ProductivityInputs(
            dt_per_sprint=dt,
            lc_per_sprint=lc,
            nbd=quality.nested_block_depth if quality is not None else None,
            wacc=quality.wacc if quality is not None else None,
            lead_time_days=lead,
        )

    @classmethod
    def compute_rsi(cls, card: Scorecard, benchmark: Optional[float] = None) -> RsiScore:
        """
        计算 RSI：total_100 = 评审分 + 生产力分，value_10 = total_100 / 10

        是否通过按精确值判断（value_10 >= 6.5），rounded_10 仅用于展示。

        Raises:
            MalformedScorecard: 评分卡没有生产力分
        """
        if card.productivity_points is None:
            raise MalformedScorecard(f"{card.contribution_id}: 评分卡缺少生产力分")
        benchmark = benchmark if benchmark is not None else settings.RSI_PASS_BENCHMARK
        review = cls.review_points(card.category_scores)
        productivity = exact(card.productivity_points)
        total = review + productivity
        value = total / 10
        rounded = (Decimal(value.numerator) / Decimal(value.denominator)).quantize(
            Decimal("0.1"), rounding=ROUND_HALF_UP)
        return RsiScore(
            contribution_id=card.contribution_id,
            review_points=float(review),
            productivity_points=float(productivity),
            total_100=float(total),
            value_10=float(value),
            rounded_10=float(rounded),
            passed=value >= exact(benchmark),
        )

    @classmethod
    def classify_participant(cls, history: Iterable[RsiScore], reliance: Optional[float] = None,
                             participant_id: str = "") -> ParticipantSummary:
        """
        按 RSI 历史对试用期参与者分类

        Exceptional: 均值 >= 8.5 且通过率 >= 0.9；Underperformer: 均值 < 6.5；其余为 Moderate。

        Raises:
            EmptyHistory: 没有任何评分
        """
        history = list(history)
        if not history:
            raise EmptyHistory(f"参与者 {participant_id or '<unknown>'} 没有 RSI 记录")
        values = [exact(score.value_10) for score in history]
        mean = sum(values) / len(values)
        pass_rate = Fraction(sum(1 for score in history if score.passed), len(history))

        if mean >= exact(settings.EXCEPTIONAL_MEAN) and pass_rate >= exact(settings.EXCEPTIONAL_PASS_RATE):
            classification = Classification.EXCEPTIONAL
        elif mean < exact(settings.RSI_PASS_BENCHMARK):
            classification = Classification.UNDERPERFORMER
        else:
            classification = Classification.MODERATE

        return ParticipantSummary(
            participant_id=participant_id,
            scorecard_count=len(history),
            mean_rsi=float(mean),
            pass_rate=float(pass_rate),
            reliance_rate=reliance,
            classification=classification,
            recommendation=RECOMMENDATIONS[classification],
        )

    # ==================== 文件格式 ====================

    @classmethod
    def parse_scorecard_text(cls, text: str) -> Scorecard:
        """
        解析 .rsi 评分卡

        contribution / reviewer / 8 行 score.<类别> / productivity（可省略）/ snippet_use / notes（可选）

        Raises:
            MalformedScorecard: 字段缺失或取值错误
            MissingCategory: 缺少评审类别
        """
        values = _read_key_values(text, MalformedScorecard)
        scores: Dict[ReviewCategory, int] = {}
        fields: Dict[str, object] = {"notes": values.pop("notes", "")}
        for key in list(values):
            if not key.startswith(SCORE_PREFIX):
                continue
            raw = values.pop(key)
            try:
                category = ReviewCategory(key[len(SCORE_PREFIX):])
            except ValueError:
                raise MalformedScorecard(f"未知评审类别: {key}")
            if not raw.isdigit():
                raise MalformedScorecard(f"{key} 必须是 0-{MAX_CATEGORY_SCORE} 的整数: {raw!r}")
            scores[category] = int(raw)

        missing = [c.value for c in ReviewCategory if c not in scores]
        if missing:
            raise MissingCategory(f"缺少评审类别: {', '.join(missing)}")

        for key, attr in (("contribution", "contribution_id"), ("reviewer", "reviewer_id")):
            if not values.get(key):
                raise MalformedScorecard(f"缺少字段: {key}")
            fields[attr] = values.pop(key)
        fields["snippet_use"] = values.pop("snippet_use", SnippetUse.NONE.value)
        productivity = values.pop("productivity", None)
        if productivity is not None:
            try:
                fields["productivity_points"] = float(productivity)
            except ValueError:
                raise MalformedScorecard(f"productivity 不是数字: {productivity!r}")
        if values:
            raise MalformedScorecard(f"未知字段: {', '.join(sorted(values))}")

        try:
            return Scorecard(category_scores=scores, **fields)
        except ValidationError as e:
            raise MalformedScorecard(e.errors()[0]["msg"].removeprefix("Value error, "))

    @classmethod
    def parse_scorecard_file(cls, path: Union[str, Path]) -> Scorecard:
        return cls.parse_scorecard_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def parse_benchmarks_text(cls, text: str) -> ProductivityBenchmarks:
        """
        解析 benchmarks.cfg（key = value 或 key: value）

        Raises:
            MissingBenchmarks: 缺少基准值，或基准值不是正数
        """
        values = _read_key_values(text, MissingBenchmarks, separators="=:")
        missing = [key for key in BENCHMARK_KEYS if key not in values]
        if missing:
            raise MissingBenchmarks(f"缺少基准值: {', '.join(missing)}")
        unknown = sorted(set(values) - set(BENCHMARK_KEYS))
        if unknown:
            logger.warning(f"忽略未知的基准字段: {', '.join(unknown)}")
        try:
            return ProductivityBenchmarks(**{key: values[key] for key in BENCHMARK_KEYS})
        except ValidationError as e:
            error = e.errors()[0]
            raise MissingBenchmarks(f"{error['loc'][0]}: 基准值必须是正数")

    @classmethod
    def parse_benchmarks_file(cls, path: Union[str, Path]) -> ProductivityBenchmarks:
        return cls.parse_benchmarks_text(Path(path).read_text(encoding="utf-8"))
