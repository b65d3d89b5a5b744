import hashlib
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from utpada.config import settings
from utpada.core.exceptions import EmptyCaseSet, EmptyTree
from utpada.models.analyzer_dto import (
    CaseCounts,
    FindingStatus,
    LineSpan,
    SourceFile,
    SourceTree,
    ValidationFinding,
    ValidationReport,
    ValidationTotals,
)
from utpada.models.schemas_dto import Diagnostic
from utpada.models.valcase_dto import CssDecl, CssPredicate, Pattern, PatternKind, ValidationCase
from utpada.services.snippet_service import SnippetBankService
from utpada.services.valcase_service import ValidationCaseService, glob_matches
from utpada.utils.css_rules import CssRule, normalize_value, parse_rules
from utpada.utils.source_normalizer import (
    CSS,
    collapse_whitespace,
    is_binary,
    language_for,
    normalize_lines,
    strip_comments,
    tokenize,
)

logger = logging.getLogger(__name__)


@lru_cache(maxsize=256)
def _compile_regex(payload: str) -> "re.Pattern[str]":
    return re.compile(payload)


def _css_rules(source: SourceFile) -> Tuple[CssRule, ...]:
    return source.derive("css_rules", lambda: tuple(parse_rules(source.raw_text)))


def build_source_file(relative_path: str, text: str, language_tag: Optional[str] = None) -> SourceFile:
    """对单个文件做归一化：按语言去注释、逐行压缩空白、切分 token"""
    language_tag = language_tag or language_for(relative_path) or "other"
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    stripped = strip_comments(text, language_tag)
    return SourceFile(
        path=relative_path,
        language_tag=language_tag,
        raw_text=text,
        lines=tuple(normalize_lines(stripped)),
        tokens=tuple(tokenize(stripped)),
    )


def _css_decl_matches(decl: CssDecl, rule: CssRule) -> bool:
    if collapse_whitespace(decl.selector) not in rule.selectors:
        return False
    value = rule.effective_value(decl.property)
    if decl.predicate == CssPredicate.PRESENT:
        return value is not None
    if decl.predicate == CssPredicate.ABSENT:
        return value is None
    if value is None:
        return False
    same = normalize_value(value) == normalize_value(decl.value)
    return same if decl.predicate == CssPredicate.EQUALS else not same


class AnalyzerService:
    """验证执行引擎：加载源码树、匹配模式、生成验证报告"""

    @classmethod
    def load_source_tree(cls, root: Union[str, Path], max_file_bytes: Optional[int] = None) -> SourceTree:
        """
        加载源码树

        只收录扩展名可识别的普通文件；无法读取、过大、二进制或位于根目录之外的文件
        记为诊断信息并跳过，不会中断加载。

        Raises:
            EmptyTree: 没有可识别的文件
        """
        root = Path(root)
        max_file_bytes = max_file_bytes or settings.MAX_FILE_BYTES
        if not root.is_dir():
            raise EmptyTree(f"源码目录不存在: {root}")
        resolved_root = root.resolve()

        files: List[SourceFile] = []
        diagnostics: List[Diagnostic] = []
        for dirpath, dirnames, filenames in os.walk(root):
            dirnames.sort()
            for name in sorted(filenames):
                path = Path(dirpath) / name
                relative = path.relative_to(root).as_posix()
                language_tag = language_for(relative)
                if language_tag is None:
                    continue
                try:
                    resolved = path.resolve()
                    if not resolved.is_relative_to(resolved_root):
                        diagnostics.append(Diagnostic(code="OutsideRoot", path=relative,
                                                      message="链接指向源码根目录之外，已跳过"))
                        continue
                    if not resolved.is_file():
                        continue
                    if resolved.stat().st_size > max_file_bytes:
                        diagnostics.append(Diagnostic(code="TooLarge", path=relative,
                                                      message=f"文件超过 {max_file_bytes} 字节，已跳过"))
                        continue
                    data = resolved.read_bytes()
                except OSError as e:
                    logger.warning(f"读取文件失败 {relative}: {e}")
                    diagnostics.append(Diagnostic(code="IoError", path=relative, message=str(e)))
                    continue

                if is_binary(data):
                    diagnostics.append(Diagnostic(code="BinaryFile", path=relative, message="二进制文件，已跳过"))
                    continue
                try:
                    text = data.decode("utf-8")
                except UnicodeDecodeError:
                    diagnostics.append(Diagnostic(code="BinaryFile", path=relative, message="不是 UTF-8 文本，已跳过"))
                    continue
                files.append(build_source_file(relative, text, language_tag))

        if not files:
            raise EmptyTree(f"源码目录中没有可识别的文件: {root}")
        files.sort(key=lambda f: f.path)
        logger.info(f"加载源码树 {root}: {len(files)} 个文件, {len(diagnostics)} 条诊断")
        return SourceTree(root=str(root), files=tuple(files), diagnostics=tuple(diagnostics))

    @classmethod
    def match_pattern(cls, pattern: Pattern, source: SourceFile,
                      diagnostics: Optional[List[Diagnostic]] = None) -> List[LineSpan]:
        """
        在单个文件上执行一个模式，按文档顺序返回匹配的行范围

        CssDecl 用在非 css 文件上时返回空列表，并追加一条 LanguageMismatch 诊断。
        """
        if pattern.kind == PatternKind.TOKENSEQ:
            needle = pattern.tokens
            tokens = source.tokens
            width = len(needle)
            spans = []
            for start in range(len(tokens) - width + 1):
                if tokens[start].text != needle[0]:
                    continue
                if all(tokens[start + i].text == needle[i] for i in range(1, width)):
                    spans.append(LineSpan(start=tokens[start].line, end=tokens[start + width - 1].line))
            return spans

        if pattern.kind == PatternKind.REGEX:
            regex = _compile_regex(pattern.payload)
            return [
                LineSpan(start=number, end=number)
                for number, line in enumerate(source.lines, start=1)
                if regex.search(line)
            ]

        if source.language_tag != CSS:
            if diagnostics is not None:
                diagnostics.append(Diagnostic(
                    code="LanguageMismatch",
                    path=source.path,
                    message=f"CssDecl 模式不适用于 {source.language_tag} 文件",
                ))
            return []
        return [
            LineSpan(start=rule.start_line, end=rule.end_line)
            for rule in _css_rules(source)
            if _css_decl_matches(pattern.css, rule)
        ]

    @classmethod
    def _match_all(cls, patterns: Tuple[Pattern, ...], source: SourceFile,
                   diagnostics: List[Diagnostic]) -> List[LineSpan]:
        spans: List[LineSpan] = []
        for pattern in patterns:
            spans.extend(cls.match_pattern(pattern, source, diagnostics))
        return sorted(spans, key=lambda span: (span.start, span.end))

    @classmethod
    def evaluate(cls, case: ValidationCase, source: SourceFile,
                 bank: Optional[SnippetBankService] = None) -> Tuple[ValidationFinding, List[Diagnostic]]:
        """一个 (用例, 文件) 组合：anti 命中即 Incorrect，否则 required 命中为 Correct，否则 Missing"""
        diagnostics: List[Diagnostic] = []
        base = dict(case_id=case.case_id, guideline_id=case.guideline_id, path=source.path)
        if not glob_matches(case.applies_to, source.path):
            return ValidationFinding(**base, status=FindingStatus.NOT_APPLICABLE), diagnostics

        recommended = bank.recommend(case.remediation_snippet_ids) if bank is not None else []
        anti = cls._match_all(case.anti_patterns, source, diagnostics)
        if anti:
            finding = ValidationFinding(**base, status=FindingStatus.INCORRECT, location=anti[0],
                                        match_count=len(anti), recommended_snippet_ids=recommended)
        else:
            required = cls._match_all(case.required_patterns, source, diagnostics)
            if required:
                finding = ValidationFinding(**base, status=FindingStatus.CORRECT, location=required[0],
                                            match_count=len(required))
            else:
                finding = ValidationFinding(**base, status=FindingStatus.MISSING,
                                            recommended_snippet_ids=recommended)
        for diagnostic in diagnostics:
            diagnostic.case_id = case.case_id
        return finding, diagnostics

    @classmethod
    def tree_digest(cls, tree: SourceTree) -> str:
        digest = hashlib.sha256()
        for path, text in tree.digest_parts():
            digest.update(path.encode("utf-8") + b"\0" + text.encode("utf-8") + b"\0")
        return digest.hexdigest()

    @classmethod
    def run_validation(cls, tree: SourceTree, cases: List[ValidationCase],
                       bank: Optional[SnippetBankService] = None,
                       workers: Optional[int] = None,
                       now: Optional[datetime] = None) -> ValidationReport:
        """
        执行全部验证用例并生成报告

        (用例, 文件) 组合可以并发执行；结果按 (case_id, path) 排序后汇总，报告对固定输入是确定的。

        Raises:
            EmptyCaseSet: 用例集为空
        """
        if not cases:
            raise EmptyCaseSet("没有可执行的验证用例")
        workers = workers or settings.VALIDATION_WORKERS
        ordered_cases = sorted(cases, key=lambda c: c.case_id)

        def run_case(case: ValidationCase) -> List[Tuple[ValidationFinding, List[Diagnostic]]]:
            return [cls.evaluate(case, source, bank) for source in tree.files]

        if workers > 1 and len(ordered_cases) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per_case = list(pool.map(run_case, ordered_cases))
        else:
            per_case = [run_case(case) for case in ordered_cases]

        results = sorted(
            (item for items in per_case for item in items),
            key=lambda item: (item[0].case_id, item[0].path),
        )
        findings = [finding for finding, _ in results]

        diagnostics: List[Diagnostic] = list(tree.diagnostics)
        seen = set()
        for _, items in results:
            for diagnostic in items:
                key = (diagnostic.code, diagnostic.case_id, diagnostic.path)
                if key not in seen:
                    seen.add(key)
                    diagnostics.append(diagnostic)

        counts = cls.count_findings(ordered_cases, findings)
        totals = ValidationTotals(
            cases_run=len(ordered_cases),
            files_scanned=len(tree.files),
            correct=sum(row.correct for row in counts),
            incorrect=sum(row.incorrect for row in counts),
            missing=sum(row.missing for row in counts),
            not_applicable=sum(row.not_applicable for row in counts),
        )

        generated_at = now or datetime.now(timezone.utc)
        case_digest = ValidationCaseService.case_set_digest(ordered_cases)
        tree_digest = cls.tree_digest(tree)
        run_id = hashlib.sha256(
            f"{case_digest}:{tree_digest}:{generated_at.isoformat()}".encode("utf-8")
        ).hexdigest()[:32]

        logger.info(
            f"验证完成 run_id={run_id}: {totals.cases_run} 个用例, {totals.files_scanned} 个文件, "
            f"Incorrect={totals.incorrect}, Missing={totals.missing}"
        )
        return ValidationReport(
            run_id=run_id,
            generated_at=generated_at,
            case_set_digest=case_digest,
            tree_digest=tree_digest,
            totals=totals,
            counts=counts,
            findings=findings,
            diagnostics=diagnostics,
        )

    @classmethod
    def count_findings(cls, cases: List[ValidationCase], findings: List[ValidationFinding]) -> List[CaseCounts]:
        """从 findings 重新计算每个用例的计数（计数不单独保存状态）"""
        rows: Dict[str, CaseCounts] = {
            case.case_id: CaseCounts(case_id=case.case_id, guideline_id=case.guideline_id)
            for case in cases
        }
        field_by_status = {
            FindingStatus.CORRECT: "correct",
            FindingStatus.INCORRECT: "incorrect",
            FindingStatus.MISSING: "missing",
            FindingStatus.NOT_APPLICABLE: "not_applicable",
        }
        for finding in findings:
            row = rows[finding.case_id]
            name = field_by_status[finding.status]
            setattr(row, name, getattr(row, name) + 1)
        return [rows[case_id] for case_id in sorted(rows)]
