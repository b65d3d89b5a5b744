import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from utpada.utils.source_normalizer import CSS, collapse_whitespace, mask_code, strip_comments

_IMPORTANT_RE = re.compile(r"\s*!\s*important\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class CssDeclaration:
    property: str
    value: str
    line: int


@dataclass
class CssRule:
    """一个规则块：选择器列表 + 直接声明 + 行范围"""
    selector: str
    start_line: int
    end_line: int = 0
    declarations: List[CssDeclaration] = field(default_factory=list)

    @property
    def selectors(self) -> List[str]:
        return [collapse_whitespace(s) for s in self.selector.split(",") if s.strip()]

    def effective_value(self, prop: str) -> Optional[str]:
        """同一块内重复声明时以最后一条为准"""
        prop = prop.lower()
        value = None
        for declaration in self.declarations:
            if declaration.property == prop:
                value = declaration.value
        return value


def normalize_value(value: str) -> str:
    return collapse_whitespace(_IMPORTANT_RE.sub("", value)).lower()


def parse_rules(text: str) -> List[CssRule]:
    """
    把样式表拆成规则块（按出现顺序）

    @media 等 at-rule 只作为容器，其中的规则照常返回；结构扫描使用屏蔽掉字符串的文本，
    取值则从去注释后的原文中截取，两者字符位置一致。
    """
    source = strip_comments(text, CSS)
    masked = mask_code(text, CSS)

    rules: List[CssRule] = []
    # 栈元素：规则块（CssRule）或 at-rule 容器（None）
    stack: List[Tuple[Optional[CssRule], int]] = []
    segment_start = 0

    def line_of(position: int) -> int:
        return masked.count("\n", 0, position) + 1

    def flush_declarations(end: int) -> None:
        if not stack or stack[-1][0] is None:
            return
        rule = stack[-1][0]
        # 分号位置取自屏蔽后的文本，字符串里的 ; 不会切开声明
        cuts = [i for i in range(segment_start, end) if masked[i] == ";"]
        offset = segment_start
        for cut in cuts + [end]:
            chunk = source[offset:cut]
            name, sep, value = chunk.partition(":")
            if sep and name.strip():
                leading = len(chunk) - len(chunk.lstrip())
                rule.declarations.append(CssDeclaration(
                    property=name.strip().lower(),
                    value=value.strip(),
                    line=line_of(offset + leading),
                ))
            offset = cut + 1

    for position, char in enumerate(masked):
        if char == "{":
            prelude = source[segment_start:position]
            if stack and stack[-1][0] is not None:
                # 嵌套规则：prelude 之前的部分仍是外层声明
                cut = masked.rfind(";", segment_start, position) + 1
                cut = cut - segment_start if cut else 0
                flush_declarations(segment_start + cut)
                prelude = prelude[cut:]
                prelude_start = segment_start + cut
            else:
                prelude_start = segment_start
            stripped = prelude.strip()
            leading = len(prelude) - len(prelude.lstrip())
            if stripped.startswith("@"):
                stack.append((None, position))
            else:
                rule = CssRule(selector=collapse_whitespace(stripped),
                               start_line=line_of(prelude_start + leading))
                rules.append(rule)
                stack.append((rule, position))
            segment_start = position + 1
        elif char == "}":
            flush_declarations(position)
            if stack:
                rule, _ = stack.pop()
                if rule is not None:
                    rule.end_line = line_of(position)
            segment_start = position + 1
        elif char == ";" and not stack:
            # 顶层语句（@import 等）
            segment_start = position + 1

    for rule, _ in stack:
        if rule is not None and not rule.end_line:
            rule.end_line = line_of(len(masked))
    return rules
