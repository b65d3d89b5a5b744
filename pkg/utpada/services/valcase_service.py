import hashlib
import logging
import re
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from utpada.config import settings
from utpada.core.exceptions import DuplicateCaseId, EmptyCaseSet, MalformedCase
from utpada.models.valcase_dto import (
    CssDecl,
    CssPredicate,
    Pattern,
    PatternKind,
    PatternRole,
    ValidationCase,
)
from utpada.utils.source_normalizer import collapse_whitespace, tokenize_payload

logger = logging.getLogger(__name__)

HEADER_KEYS = ("id", "guideline", "desc", "applies", "remediate")
MANDATORY_KEYS = ("id", "guideline", "applies")
_CSS_SEPARATOR_RE = re.compile(r"\s+::\s+")
_GLOB_FORBIDDEN = set("?[]{}\\")


@lru_cache(maxsize=512)
def compile_glob(glob: str) -> "re.Pattern[str]":
    """
    把 applies 里的 glob 编译成正则

    只支持 `*`（段内）和 `**`（跨段，必须独占一段）；路径必须是相对路径。

    Raises:
        ValueError: glob 不合法
    """
    glob = glob.strip()
    if not glob:
        raise ValueError("glob 为空")
    if glob.startswith("/"):
        raise ValueError(f"glob 必须是相对路径: {glob}")
    if _GLOB_FORBIDDEN & set(glob):
        raise ValueError(f"glob 只支持 * 和 **: {glob}")

    segments = glob.split("/")
    regex = ""
    for index, segment in enumerate(segments):
        last = index == len(segments) - 1
        if segment in ("", ".", ".."):
            raise ValueError(f"glob 含非法路径段: {glob}")
        if segment == "**":
            regex += ".*" if last else "(?:[^/]+/)*"
            continue
        if "**" in segment:
            raise ValueError(f"** 必须独占一个路径段: {glob}")
        regex += re.escape(segment).replace(r"\*", "[^/]*")
        if not last:
            regex += "/"
    return re.compile(regex)


def glob_matches(globs: Tuple[str, ...], relative_path: str) -> bool:
    return any(compile_glob(glob).fullmatch(relative_path) for glob in globs)


class ValidationCaseService:
    """验证用例文件（.vcase）的解析、序列化与批量加载"""

    @classmethod
    def _parse_css_payload(cls, payload: str) -> CssDecl:
        parts = _CSS_SEPARATOR_RE.split(payload.strip())
        if len(parts) != 3:
            raise ValueError("CssDecl 格式应为 <selector> :: <property> :: <condition>")
        selector, prop, condition = (part.strip() for part in parts)
        if condition.startswith("!="):
            return CssDecl(selector=selector, property=prop,
                           predicate=CssPredicate.NOT_EQUALS, value=condition[2:].strip())
        if condition.startswith("="):
            return CssDecl(selector=selector, property=prop,
                           predicate=CssPredicate.EQUALS, value=condition[1:].strip())
        if condition in ("present", "absent"):
            return CssDecl(selector=selector, property=prop, predicate=CssPredicate(condition))
        raise ValueError(f"未知的取值谓词: {condition}")

    @classmethod
    def build_pattern(cls, kind: PatternKind, payload: str) -> Pattern:
        """根据 kind 构造 Pattern；payload 不合法时抛 ValueError"""
        if kind == PatternKind.TOKENSEQ:
            payload = collapse_whitespace(payload)
            return Pattern(kind=kind, payload=payload, tokens=tuple(tokenize_payload(payload)))
        if kind == PatternKind.REGEX:
            return Pattern(kind=kind, payload=payload.strip())
        css = cls._parse_css_payload(payload)
        return Pattern(kind=kind, payload=css.to_payload(), css=css)

    @classmethod
    def parse_case_text(cls, text: str, path: Optional[str] = None) -> ValidationCase:
        """
        解析验证用例文本

        Args:
            text: 文件内容
            path: 文件路径（仅用于诊断信息）

        Returns:
            ValidationCase: 满足所有类型约束的用例

        Raises:
            MalformedCase: 缺字段、glob 非法、正则无法编译等
        """
        header: Dict[str, Tuple[str, int]] = {}
        blocks: Dict[PatternRole, List[Pattern]] = {PatternRole.REQUIRED: [], PatternRole.ANTI: []}
        # 当前 pattern 块：[role, kind, 起始行]
        pending: Optional[list] = None

        for line_no, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition(":")
            key = key.strip().lower()
            value = value.strip()
            if not sep:
                raise MalformedCase("缺少 ':' 分隔符", path, line_no)

            if pending is not None:
                expected = "kind" if pending[1] is None else "match"
                if key != expected:
                    raise MalformedCase(f"pattern 块中应为 '{expected}:'", path, line_no, key)
                if key == "kind":
                    try:
                        pending[1] = PatternKind(value.lower())
                    except ValueError:
                        raise MalformedCase(f"未知的模式类型: {value}", path, line_no, "kind")
                    continue
                try:
                    pattern = cls.build_pattern(pending[1], value)
                except (ValueError, ValidationError) as e:
                    raise MalformedCase(_first_error(e), path, line_no, "match")
                blocks[pending[0]].append(pattern)
                pending = None
                continue

            if key == "pattern":
                try:
                    pending = [PatternRole(value.lower()), None, line_no]
                except ValueError:
                    raise MalformedCase(f"pattern 只能是 required 或 anti: {value}", path, line_no, "pattern")
                continue
            if key in ("kind", "match"):
                raise MalformedCase(f"'{key}:' 必须位于 'pattern:' 之后", path, line_no, key)
            if key not in HEADER_KEYS:
                raise MalformedCase(f"未知字段: {key}", path, line_no, key)
            if key in header:
                raise MalformedCase("字段重复", path, line_no, key)
            header[key] = (value, line_no)

        if pending is not None:
            raise MalformedCase("pattern 块不完整", path, pending[2], "pattern")
        for key in MANDATORY_KEYS:
            if key not in header or not header[key][0]:
                raise MalformedCase("缺少必填字段", path, header.get(key, ("", None))[1], key)

        applies = tuple(glob.strip() for glob in header["applies"][0].split(","))
        for glob in applies:
            try:
                compile_glob(glob)
            except ValueError as e:
                raise MalformedCase(str(e), path, header["applies"][1], "applies")

        remediate_value, remediate_line = header.get("remediate", ("", None))
        remediation = tuple(s.strip() for s in remediate_value.split(",") if s.strip())

        try:
            return ValidationCase(
                case_id=header["id"][0],
                guideline_id=header["guideline"][0],
                description=header.get("desc", ("", None))[0],
                applies_to=applies,
                required_patterns=tuple(blocks[PatternRole.REQUIRED]),
                anti_patterns=tuple(blocks[PatternRole.ANTI]),
                remediation_snippet_ids=remediation,
            )
        except ValidationError as e:
            error = e.errors()[0]
            field = str(error["loc"][0]) if error["loc"] else None
            line = remediate_line if field == "remediation_snippet_ids" else None
            raise MalformedCase(_first_error(e), path, line, field)

    @classmethod
    def parse_case_file(cls, path: Union[str, Path]) -> ValidationCase:
        """读取并解析单个 .vcase 文件（纯函数：相同字节得到相同结果）"""
        path = Path(path)
        try:
            text = path.read_bytes().decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedCase("文件不是 UTF-8 编码", str(path))
        return cls.parse_case_text(text, str(path))

    @classmethod
    def serialize_case(cls, case: ValidationCase) -> str:
        """序列化为规范格式；parse(serialize(c)) == c"""
        lines = [
            f"id: {case.case_id}",
            f"guideline: {case.guideline_id}",
            f"desc: {collapse_whitespace(case.description)}",
            f"applies: {','.join(case.applies_to)}",
        ]
        for role, pattern in case.patterns():
            lines.append(f"pattern: {role.value}")
            lines.append(f"kind: {pattern.kind.value}")
            lines.append(f"match: {pattern.payload}")
        if case.remediation_snippet_ids:
            lines.append(f"remediate: {','.join(case.remediation_snippet_ids)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load_case_set(cls, directory: Union[str, Path], extension: Optional[str] = None) -> List[ValidationCase]:
        """
        加载目录下所有用例文件，按 case_id 排序

        文件按名称顺序解析，遇到第一个错误立即失败，结果与文件系统枚举顺序无关。

        Raises:
            MalformedCase / DuplicateCaseId: 解析失败
            EmptyCaseSet: 目录中没有用例文件
        """
        directory = Path(directory)
        extension = extension or settings.CASE_EXTENSION
        if not directory.is_dir():
            raise EmptyCaseSet(f"用例目录不存在: {directory}")

        files = sorted(p for p in directory.iterdir() if p.is_file() and p.suffix == extension)
        if not files:
            raise EmptyCaseSet(f"目录中没有 {extension} 用例文件: {directory}")

        cases: Dict[str, ValidationCase] = {}
        for file in files:
            case = cls.parse_case_file(file)
            if case.case_id in cases:
                raise DuplicateCaseId(case.case_id, str(file))
            cases[case.case_id] = case

        logger.info(f"加载了 {len(cases)} 个验证用例: {directory}")
        return [cases[case_id] for case_id in sorted(cases)]

    @classmethod
    def case_set_digest(cls, cases: List[ValidationCase]) -> str:
        digest = hashlib.sha256()
        for case in sorted(cases, key=lambda c: c.case_id):
            digest.update(cls.serialize_case(case).encode("utf-8"))
        return digest.hexdigest()


def _first_error(error: Exception) -> str:
    if isinstance(error, ValidationError):
        message = error.errors()[0]["msg"]
        return message.removeprefix("Value error, ")
    return str(error)
