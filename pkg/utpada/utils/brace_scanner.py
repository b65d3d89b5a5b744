"""
花括号语言（kotlin-like / js-like）的块结构扫描

输入是 mask_code() 处理后的文本（注释已去除、字符串内容已置空），因此字符串和注释里的
花括号不会影响结构。每个块按其前导文本（header）分类为 class / function / control / block。
"""
import re
from dataclasses import dataclass, field
from typing import List, Optional

from utpada.core.exceptions import UnbalancedBraces
from utpada.utils.source_normalizer import tokenize

CLASS = "class"
FUNCTION = "function"
CONTROL = "control"
BLOCK = "block"

CONTROL_KEYWORDS = (
    "if", "else", "for", "while", "do", "try", "catch", "finally",
    "switch", "when", "synchronized", "with",
)
_CONTROL_RE = re.compile(r"^(?:%s)\b" % "|".join(CONTROL_KEYWORDS))
_CLASS_RE = re.compile(
    r"^(?:[\w@]+\s+)*?(class|interface|object|enum|struct|record|trait|impl)\b"
    r"(?:\s+class)?\s*([A-Za-z_$][\w$]*)?"
)
_FUNCTION_KEYWORD_RE = re.compile(r"\b(?:fun|function|func|fn)\b\s*\*?\s*(?:<[^>]*>\s*)?(?:[\w$]+\.)*([A-Za-z_$][\w$]*)?")
_SIGNATURE_RE = re.compile(
    r"^[\w<>\[\]@.,?\s]*?\b([A-Za-z_$][\w$]*)\s*\([^()]*(?:\([^()]*\)[^()]*)*\)"
    r"\s*(?::\s*[\w<>\[\]?., ]+)?\s*(?:throws\s+[\w., ]+)?$"
)
_INITIALIZER_RE = re.compile(r"^(?:init|static)$")
# return when {...} / val x = when (y) {...}
_WHEN_EXPRESSION_RE = re.compile(r"(?:^|[\s=(])when\s*(?:\(.*\))?$")
_ARROW_NAME_RE = re.compile(r"([A-Za-z_$][\w$]*)\s*[=:]\s*(?:async\s*)?(?:\([^()]*\)|[\w$]+)\s*=>$")

DECISION_PATTERNS = (
    re.compile(r"\bif\b"),
    re.compile(r"\bfor\b"),
    re.compile(r"\bwhile\b"),
    re.compile(r"\bcase\b"),
    re.compile(r"\bcatch\b"),
    re.compile(r"&&"),
    re.compile(r"\|\|"),
    # 三元运算符；排除 Kotlin/TS 的 ?. ?: 以及可空类型
    re.compile(r"(?<=[\s)])\?(?![.:?)>,=])"),
)
TERMINATORS = ("return", "throw", "break", "continue")
LABELS = ("case", "default")
# 上一行以这些 token 结尾时，下一行仍属于同一条语句
_TRAILING_CONTINUATION = set("=+-*/%&|^!~<>?:,.([")
# 下一行以这些 token 开头时，仍属于上一条语句
_LEADING_CONTINUATION = set(".?:&|+*/=)],")
_CONTROL_HEADS = ("if", "for", "while", "catch", "switch", "when", "synchronized", "with")


@dataclass
class Block:
    kind: str
    header: str
    name: str
    open_pos: int
    open_line: int
    depth: int
    parent: Optional[int]
    close_pos: int = -1
    close_line: int = -1
    children: List[int] = field(default_factory=list)


def _header_tail(header: str) -> str:
    """取 header 的最后一条语句：从末行向上扩展，直到括号配平"""
    lines = [line for line in header.split("\n") if line.strip()]
    if not lines:
        return ""
    taken: List[str] = []
    for line in reversed(lines):
        taken.insert(0, line.strip())
        text = " ".join(taken)
        if text.count("(") >= text.count(")"):
            return text
    return " ".join(taken)


def classify_header(header: str) -> tuple:
    """返回 (kind, name)"""
    text = _header_tail(header)
    if not text:
        return BLOCK, ""
    if _CONTROL_RE.match(text):
        return CONTROL, text.split()[0].split("(")[0]
    if _WHEN_EXPRESSION_RE.search(text) and not _FUNCTION_KEYWORD_RE.search(text):
        return CONTROL, "when"
    match = _CLASS_RE.match(text)
    if match:
        name = match.group(2)
        if not name or name in ("class",):
            name = "Companion" if text.startswith("companion") else "<anonymous>"
        return CLASS, name
    match = _FUNCTION_KEYWORD_RE.search(text)
    if match:
        return FUNCTION, match.group(1) or "<anonymous>"
    if _INITIALIZER_RE.match(text):
        return FUNCTION, text
    if text.endswith("=>"):
        match = _ARROW_NAME_RE.search(text)
        return FUNCTION, match.group(1) if match else "<lambda>"
    match = _SIGNATURE_RE.match(text)
    if match and match.group(1) not in CONTROL_KEYWORDS:
        return FUNCTION, match.group(1)
    return BLOCK, ""


def scan_blocks(masked: str, path: str = "<text>") -> List[Block]:
    """
    扫描全部花括号块（按左括号出现顺序）

    Raises:
        UnbalancedBraces: 多余的右括号或未闭合的左括号，附带行号
    """
    blocks: List[Block] = []
    stack: List[int] = []
    segment_start = 0
    line = 1
    for position, char in enumerate(masked):
        if char == "\n":
            line += 1
        elif char == "{":
            kind, name = classify_header(masked[segment_start:position])
            parent = stack[-1] if stack else None
            blocks.append(Block(kind=kind, header=_header_tail(masked[segment_start:position]), name=name,
                                open_pos=position, open_line=line, depth=len(stack) + 1, parent=parent))
            if parent is not None:
                blocks[parent].children.append(len(blocks) - 1)
            stack.append(len(blocks) - 1)
            segment_start = position + 1
        elif char == "}":
            if not stack:
                raise UnbalancedBraces(path, line)
            block = blocks[stack.pop()]
            block.close_pos = position
            block.close_line = line
            segment_start = position + 1
        elif char == ";":
            segment_start = position + 1
    if stack:
        raise UnbalancedBraces(path, blocks[stack[-1]].open_line)
    return blocks


def enclosing(blocks: List[Block], index: int, kind: str) -> Optional[int]:
    parent = blocks[index].parent
    while parent is not None:
        if blocks[parent].kind == kind:
            return parent
        parent = blocks[parent].parent
    return None


def count_decisions(masked: str, blocks: List[Block], function_index: int) -> int:
    """函数体内的判定点数量（不含函数本身的 1）"""
    function = blocks[function_index]
    body = masked[function.open_pos + 1:function.close_pos]
    decisions = sum(len(pattern.findall(body)) for pattern in DECISION_PATTERNS)
    # fun f(x: Int) = when (x) { ... }
    if _WHEN_EXPRESSION_RE.search(function.header):
        decisions += count_when_branches(masked, blocks, function_index)
    for index in descendants(blocks, function_index):
        block = blocks[index]
        if block.kind == CONTROL and block.name == "when":
            decisions += count_when_branches(masked, blocks, index)
    return decisions


def descendants(blocks: List[Block], index: int) -> List[int]:
    result: List[int] = []
    pending = list(blocks[index].children)
    while pending:
        child = pending.pop()
        result.append(child)
        pending.extend(blocks[child].children)
    return sorted(result)


def count_when_branches(masked: str, blocks: List[Block], when_index: int) -> int:
    """when 块直接层级上的 `->` 分支数，不含 else 分支"""
    block = blocks[when_index]
    nested = [(blocks[c].open_pos, blocks[c].close_pos) for c in block.children]
    count = 0
    start = block.open_pos + 1
    for match in re.finditer(r"->", masked[start:block.close_pos]):
        position = start + match.start()
        if any(open_pos < position < close_pos for open_pos, close_pos in nested):
            continue
        line_start = max(masked.rfind("\n", 0, position), masked.rfind("{", 0, position),
                         masked.rfind("}", 0, position), masked.rfind(";", 0, position)) + 1
        if masked[line_start:position].strip() == "else":
            continue
        count += 1
    return count


@dataclass
class _Frame:
    paren: int = 0
    at_start: bool = True
    terminator: bool = False
    terminator_nest: int = 0
    after_terminator: bool = False
    after_control: bool = False
    control_paren: Optional[int] = None
    in_label: bool = False
    dead_first: Optional[int] = None
    dead_last: Optional[int] = None


def find_dead_code(masked: str) -> List[tuple]:
    """
    找出同一块内无条件 return/throw/break/continue 之后的语句

    Returns:
        List[tuple]: (起始行, 结束行)，每个终止语句最多一段
    """
    spans: List[tuple] = []
    frames: List[_Frame] = [_Frame()]
    previous = None

    def close_region(frame: _Frame) -> None:
        if frame.dead_first is not None:
            spans.append((frame.dead_first, frame.dead_last))
        frame.dead_first = frame.dead_last = None
        frame.after_terminator = False

    def mark_dead(frame: _Frame, line: int) -> None:
        if frame.after_terminator:
            if frame.dead_first is None:
                frame.dead_first = line
            frame.dead_last = line

    def end_statement(frame: _Frame) -> None:
        if frame.terminator and frame.terminator_nest == 0:
            frame.terminator = False
            frame.after_terminator = True
        frame.at_start = True

    for token in tokenize(masked):
        frame = frames[-1]
        text = token.text
        if (previous is not None and token.line > previous.line and frame.paren == 0
                and previous.text not in _TRAILING_CONTINUATION
                and text not in _LEADING_CONTINUATION):
            if frame.after_control:
                frame.after_control = False
            else:
                end_statement(frame)

        if text == "}":
            if len(frames) > 1:
                close_region(frames.pop())
            frame = frames[-1]
            if frame.terminator:
                frame.terminator_nest -= 1
            mark_dead(frame, token.line)
            if frame.paren == 0 and not frame.terminator:
                frame.at_start = True
            previous = token
            continue

        if frame.at_start and text in LABELS:
            close_region(frame)
            frame.in_label = True
        elif frame.at_start and text in TERMINATORS and not frame.after_terminator:
            frame.terminator = True
            frame.terminator_nest = 0
        else:
            mark_dead(frame, token.line)

        do_while_tail = text == "while" and previous is not None and previous.text == "}"
        if frame.at_start and text in _CONTROL_HEADS and not do_while_tail:
            frame.control_paren = frame.paren
        elif frame.at_start and text in ("else", "do", "try", "finally"):
            frame.after_control = True

        if text in ("(", "["):
            frame.paren += 1
            if frame.terminator:
                frame.terminator_nest += 1
            frame.at_start = False
        elif text in (")", "]"):
            frame.paren = max(frame.paren - 1, 0)
            if frame.terminator:
                frame.terminator_nest -= 1
            if frame.control_paren is not None and frame.paren == frame.control_paren:
                frame.control_paren = None
                frame.after_control = True
            frame.at_start = False
        elif text == "{":
            if frame.terminator:
                frame.terminator_nest += 1
            frame.after_control = False
            frame.at_start = False
            frames.append(_Frame())
        elif text == ";" and frame.paren == 0:
            end_statement(frame)
        elif text == ":" and frame.in_label and frame.paren == 0:
            frame.in_label = False
            frame.at_start = True
        else:
            frame.at_start = False
            if frame.after_control and text not in ("else", "do", "try", "finally") and text != "if":
                frame.after_control = False
        previous = token

    while frames:
        frame = frames.pop()
        if frame.terminator:
            frame.after_terminator = True
        close_region(frame)
    spans.sort()
    return spans
