"""
utpada 命令行

退出码: 0 正常；1 验证发现 Incorrect/Missing；2 执行错误；3 Metric DB 错误；64 参数错误。
JSON 输出写到 stdout，日志写到 stderr。
"""
import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path
from typing import Any, Callable, List, Optional

from pydantic_core import to_jsonable_python

from utpada.config import settings
from utpada.core.exceptions import (
    DanglingReference,
    DuplicateContribution,
    MissingBenchmarks,
    StoreError,
    UnknownParticipant,
    UtpadaError,
)
from utpada.database.metric_db import MetricDb
from utpada.models.metric_dto import CurationEvent, ValidationSummary
from utpada.models.rsi_dto import ScoreResult
from utpada.models.schemas_dto import Diagnostic
from utpada.models.snippet_dto import SubmitterRole
from utpada.services.analyzer_service import AnalyzerService
from utpada.services.metrics_service import MetricsService
from utpada.services.report_service import ReportService
from utpada.services.rsi_service import RsiService
from utpada.services.snippet_service import SnippetBankService
from utpada.services.valcase_service import ValidationCaseService
from utpada.tools.security import JWTManager
from utpada.utils.workdays import sprint_index, to_date

logger = logging.getLogger("utpada.cli")

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_ERROR = 2
EXIT_STORE = 3
EXIT_USAGE = 64

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class CliParser(argparse.ArgumentParser):
    """参数错误时以 64 退出（argparse 默认是 2，和执行错误冲突）"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ==================== 输出 ====================

def _render_text(data: Any, indent: str = "") -> List[str]:
    """把 JSON 结构展开成缩进的 key: value 文本；元素为对象的列表渲染成制表符表格"""
    lines: List[str] = []
    if isinstance(data, dict):
        for key, value in data.items():
            if isinstance(value, (dict, list)) and value:
                lines.append(f"{indent}{key}:")
                lines.extend(_render_text(value, indent + "  "))
            else:
                lines.append(f"{indent}{key}: {'-' if value is None or value == [] else value}")
    elif isinstance(data, list):
        if data and all(isinstance(item, dict) for item in data):
            columns = [k for k, v in data[0].items() if not isinstance(v, (dict, list))]
            lines.append(indent + "\t".join(columns))
            for item in data:
                lines.append(indent + "\t".join("-" if item.get(c) is None else str(item.get(c)) for c in columns))
        else:
            lines.extend(f"{indent}- {item}" for item in data)
    else:
        lines.append(f"{indent}{data}")
    return lines


def emit(args: argparse.Namespace, payload: Any, out: Optional[str] = None) -> None:
    data = to_jsonable_python(payload)
    if args.format == "text":
        text = "\n".join(_render_text(data)) + "\n"
    else:
        text = json.dumps(data, ensure_ascii=False, indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"报告已写入 {out}")
    else:
        sys.stdout.write(text)


def _db_path(args: argparse.Namespace) -> str:
    return args.db or settings.DB


def _bank(args: argparse.Namespace) -> SnippetBankService:
    return SnippetBankService(getattr(args, "bank", None) or settings.BANK)


def _report_bank(args: argparse.Namespace) -> Optional[SnippetBankService]:
    """报告只读；片段库目录不存在时不创建，片段ID按格式判断"""
    root = Path(getattr(args, "bank", None) or settings.BANK)
    if not root.is_dir():
        logger.info(f"片段库不存在: {root}，按片段ID格式判断是否使用片段库")
        return None
    return SnippetBankService(root)


def _parse_date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"日期格式应为 YYYY-MM-DD: {value}")


def _csv(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


# ==================== 子命令 ====================

def cmd_validate(args: argparse.Namespace) -> int:
    cases = ValidationCaseService.load_case_set(args.cases or settings.CASES)
    tree = AnalyzerService.load_source_tree(args.source)
    report = AnalyzerService.run_validation(tree, cases, _bank(args))
    # 先输出报告；Metric DB 被占用时报告不会丢
    emit(args, report, args.out)
    with MetricDb.open(_db_path(args)) as db:
        db.append_validation_summary(ValidationSummary.from_report(report, org=args.org))
    return EXIT_VIOLATIONS if report.has_violations else EXIT_OK


def cmd_snippet_add(args: argparse.Namespace) -> int:
    body = Path(args.body_file).read_bytes().decode("utf-8") if args.body_file else args.body
    snippet = _bank(args).add_snippet({
        "title": args.title,
        "language_tag": args.language,
        "keywords": _csv(args.keywords),
        "guideline_ids": _csv(args.guidelines or ""),
        "body": body,
        "submitted_by_role": args.role,
        "supersedes": args.supersedes,
    })
    emit(args, snippet)
    return EXIT_OK


def cmd_snippet_curate(args: argparse.Namespace) -> int:
    snippet = _bank(args).curate(args.snippet_id, approve=args.approve)
    with MetricDb.open(_db_path(args)) as db:
        db.append_curation(CurationEvent(snippet_id=args.snippet_id, approved=args.approve))
    emit(args, snippet)
    return EXIT_OK


def cmd_snippet_search(args: argparse.Namespace) -> int:
    hits = _bank(args).search(args.query, args.limit)
    emit(args, {"query": args.query, "count": len(hits), "hits": hits})
    return EXIT_OK


def cmd_snippet_show(args: argparse.Namespace) -> int:
    emit(args, _bank(args).lookup(args.snippet_id))
    return EXIT_OK


def cmd_snippet_reindex(args: argparse.Namespace) -> int:
    emit(args, {"keywords": _bank(args).rebuild_index()})
    return EXIT_OK


def cmd_ingest_checkins(args: argparse.Namespace) -> int:
    batch = MetricsService.parse_checkins(Path(args.tsv).read_text(encoding="utf-8"))
    diagnostics = list(batch.diagnostics)
    ingested = 0
    with MetricDb.open(_db_path(args)) as db:
        for record in batch.records:
            try:
                db.append_contribution(record)
                ingested += 1
            except DuplicateContribution as e:
                logger.warning(e.message)
                diagnostics.append(Diagnostic(code="DuplicateRecord", record_id=record.contribution_id,
                                              message=e.message))
    emit(args, {"ingested": ingested, "skipped": len(diagnostics), "diagnostics": diagnostics})
    return EXIT_OK


def cmd_review_score(args: argparse.Namespace) -> int:
    card = RsiService.parse_scorecard_file(args.scorecard)
    with MetricDb.open(_db_path(args)) as db:
        record = db.contributions.get(card.contribution_id)
        if record is None:
            raise DanglingReference("scorecard", card.contribution_id)

        inputs = None
        warnings: List[str] = []
        if card.productivity_points is None:
            if not args.benchmarks:
                raise MissingBenchmarks("评分卡没有 productivity，需要 --benchmarks 计算生产力分")
            bench = RsiService.parse_benchmarks_file(args.benchmarks)
            records = db.records_of(record.participant_id)
            start = min(to_date(r.assigned_at) for r in records)
            agile = MetricsService.agile_metrics(records, start)
            quality = None
            if args.source:
                quality = MetricsService.code_quality(AnalyzerService.load_source_tree(args.source))
            else:
                warnings.append("未提供 --source，嵌套深度和 WACC 记 0 分")
            sprint = sprint_index(record.submitted_at, start, agile.sprint_days)
            inputs = RsiService.productivity_inputs(agile, quality, sprint=sprint)
            points = RsiService.productivity_points(inputs, bench)
            card = card.model_copy(update={"productivity_points": float(points)})

        rsi = RsiService.compute_rsi(card)
        db.append_scorecard(card)
        sequence = db.append_rsi(rsi)
    emit(args, ScoreResult(scorecard=card, rsi=rsi, inputs=inputs, sequence=sequence, warnings=warnings))
    return EXIT_OK


def cmd_report_cohort(args: argparse.Namespace) -> int:
    with MetricDb.open(_db_path(args), read_only=True) as db:
        report = ReportService.cohort_report(db, _report_bank(args))
    emit(args, report)
    return EXIT_OK


def cmd_report_participant(args: argparse.Namespace) -> int:
    with MetricDb.open(_db_path(args), read_only=True) as db:
        report = ReportService.participant_report(db, args.participant_id,
                                                  sprint_start=args.sprint_start, bank=_report_bank(args))
    emit(args, report)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    tree = AnalyzerService.load_source_tree(args.source)
    payload = {"code_quality": MetricsService.code_quality(tree), "agile": None}
    if args.participant:
        with MetricDb.open(_db_path(args), read_only=True) as db:
            records = db.records_of(args.participant)
        if not records:
            raise UnknownParticipant(args.participant)
        start = args.sprint_start or min(to_date(r.assigned_at) for r in records)
        payload["agile"] = MetricsService.agile_metrics(records, start)
    emit(args, payload)
    return EXIT_OK


def cmd_mask(args: argparse.Namespace) -> int:
    key = args.key or settings.MASK_KEY
    if not key:
        print("utpada mask: error: 需要 --key 或环境变量 UTPADA_MASK_KEY", file=sys.stderr)
        return EXIT_USAGE
    with MetricDb.open(_db_path(args), read_only=True) as db:
        count = ReportService.mask(db, key, args.out)
    emit(args, {"events": count, "out": args.out})
    return EXIT_OK


def cmd_token(args: argparse.Namespace) -> int:
    token = JWTManager.create_access_token(args.subject, SubmitterRole(args.role))
    emit(args, {"access_token": token, "token_type": "bearer"})
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from utpada.main import serve

    serve(host=args.host, port=args.port)
    return EXIT_OK


# ==================== 参数 ====================

def build_parser() -> argparse.ArgumentParser:
    # 子命令也接受全局参数；SUPPRESS 保证子命令没写时不覆盖主命令上的值
    common = CliParser(add_help=False)
    common.add_argument("--db", default=argparse.SUPPRESS, help="Metric DB 路径（覆盖 UTPADA_DB）")
    common.add_argument("--format", choices=("json", "text"), default=argparse.SUPPRESS)

    parser = CliParser(prog="utpada", description="新员工编程生产力工具：规范验证、代码片段库、RSI 与指标")
    parser.add_argument("--db", default=None, help="Metric DB 路径（覆盖 UTPADA_DB）")
    parser.add_argument("--format", choices=("json", "text"), default="json", help="输出格式")
    commands = parser.add_subparsers(dest="command", metavar="<command>")
    commands.required = True

    def leaf(group, name: str, handler: Callable[[argparse.Namespace], int], help_text: str):
        sub = group.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=handler)
        return sub

    p = leaf(commands, "validate", cmd_validate, "对源码树执行全部验证用例")
    p.add_argument("--source", required=True, help="源码目录")
    p.add_argument("--cases", help="用例目录（默认 UTPADA_CASES）")
    p.add_argument("--bank", help="片段库目录（默认 UTPADA_BANK）")
    p.add_argument("--out", help="报告输出文件，默认 stdout")
    p.add_argument("--org", default="default", help="组织标签，用于质量趋势")

    snippet = commands.add_parser("snippet", help="代码片段库").add_subparsers(dest="action", metavar="<action>")
    snippet.required = True
    p = leaf(snippet, "add", cmd_snippet_add, "提交候选片段")
    p.add_argument("--title", required=True)
    p.add_argument("--language", default="other")
    p.add_argument("--keywords", required=True, help="逗号分隔")
    p.add_argument("--guidelines", help="逗号分隔的规范ID")
    p.add_argument("--role", choices=[r.value for r in SubmitterRole], default=SubmitterRole.DEVELOPER.value)
    p.add_argument("--supersedes", help="被替代的片段ID")
    p.add_argument("--bank")
    body = p.add_mutually_exclusive_group(required=True)
    body.add_argument("--body-file", help="代码文件，内容原样保存")
    body.add_argument("--body", help="代码文本")

    p = leaf(snippet, "curate", cmd_snippet_curate, "审核候选片段")
    p.add_argument("snippet_id")
    p.add_argument("--bank")
    decision = p.add_mutually_exclusive_group(required=True)
    decision.add_argument("--approve", dest="approve", action="store_true")
    decision.add_argument("--reject", dest="approve", action="store_false")

    p = leaf(snippet, "search", cmd_snippet_search, "关键词检索")
    p.add_argument("query")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--bank")

    p = leaf(snippet, "show", cmd_snippet_show, "查看片段")
    p.add_argument("snippet_id")
    p.add_argument("--bank")

    p = leaf(snippet, "reindex", cmd_snippet_reindex, "重建关键词索引")
    p.add_argument("--bank")

    ingest = commands.add_parser("ingest", help="导入数据").add_subparsers(dest="action", metavar="<action>")
    ingest.required = True
    p = leaf(ingest, "checkins", cmd_ingest_checkins, "导入提交记录 TSV")
    p.add_argument("tsv")

    review = commands.add_parser("review", help="代码评审").add_subparsers(dest="action", metavar="<action>")
    review.required = True
    p = leaf(review, "score", cmd_review_score, "录入评分卡并计算 RSI")
    p.add_argument("--scorecard", required=True)
    p.add_argument("--benchmarks", help="benchmarks.cfg，评分卡没有 productivity 时必需")
    p.add_argument("--source", help="提交对应的源码目录，用于嵌套深度和 WACC")

    report = commands.add_parser("report", help="报告").add_subparsers(dest="action", metavar="<action>")
    report.required = True
    p = leaf(report, "cohort", cmd_report_cohort, "群体报告")
    p.add_argument("--bank")
    p = leaf(report, "participant", cmd_report_participant, "个人报告")
    p.add_argument("participant_id")
    p.add_argument("--bank")
    p.add_argument("--sprint-start", type=_parse_date)

    p = leaf(commands, "metrics", cmd_metrics, "代码质量与敏捷指标")
    p.add_argument("--source", required=True)
    p.add_argument("--participant")
    p.add_argument("--sprint-start", type=_parse_date)

    p = leaf(commands, "mask", cmd_mask, "写出脱敏的 Metric DB 副本")
    p.add_argument("--key", help="HMAC 密钥（默认 UTPADA_MASK_KEY）")
    p.add_argument("--out", required=True)

    p = leaf(commands, "token", cmd_token, "签发 API 访问 token")
    p.add_argument("--subject", required=True)
    p.add_argument("--role", required=True, choices=[r.value for r in SubmitterRole])

    p = leaf(commands, "serve", cmd_serve, "启动 HTTP 服务")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(level=settings.LOG_LEVEL, format=LOG_FORMAT, stream=sys.stderr)
    try:
        return args.handler(args)
    except StoreError as e:
        logger.error(e.message)
        print(f"utpada: store error: {e.message}", file=sys.stderr)
        return EXIT_STORE
    except UtpadaError as e:
        logger.error(e.message)
        print(f"utpada: error: {e.message}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, UnicodeDecodeError, ValueError) as e:
        logger.error(str(e))
        print(f"utpada: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
