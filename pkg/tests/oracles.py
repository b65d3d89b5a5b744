"""
测试用的暴力扫描实现

逐字符/逐行扫描，不复用 utpada.utils 中的正则和扫描器，用来和生产代码的结果逐项对照。
只覆盖测试夹具里出现的写法：单行函数头、每行一条语句、右括号单独成行或以 `} else {` 形式出现。
"""
import re
from typing import Dict, List, Optional, Tuple

CONTROL_WORDS = {"if", "else", "for", "while", "do", "try", "catch", "finally",
                 "switch", "when", "synchronized", "with"}
CLASS_WORDS = {"class", "interface", "object", "enum"}
DECISION_WORDS = {"if", "for", "while", "case", "catch"}
TERMINATOR_WORDS = {"return", "throw", "break", "continue"}
LABEL_WORDS = {"case", "default"}
TERNARY_FORBIDDEN_NEXT = ".:?)>,="

TOPLEVEL = "<toplevel>"


# ==================== 去注释 / 屏蔽字符串 ====================

def _is_ident_start(char: str) -> bool:
    return char.isalpha() or char in "_$"


def _is_ident_part(char: str) -> bool:
    return char.isalnum() or char in "_$"


def _string_end(text: str, start: int, allow_backtick: bool) -> Optional[int]:
    if text.startswith('"""', start):
        close = text.find('"""', start + 3)
        if close >= 0:
            return close + 3
    quote = text[start]
    position = start + 1
    while position < len(text):
        char = text[position]
        if char == "\\":
            position += 2
            continue
        if char == quote:
            return position + 1
        if char == "\n" and not (allow_backtick and quote == "`"):
            return None
        position += 1
    return None


def scrub(text: str, language: str, keep_strings: bool) -> str:
    """
    language: kotlin-like / js-like / css / html / other
    keep_strings=False 时字符串内容换成空格（引号保留）
    """
    if language == "html":
        out = []
        position = 0
        while True:
            start = text.find("<!--", position)
            end = text.find("-->", start + 4) if start >= 0 else -1
            if start < 0 or end < 0:
                out.append(text[position:])
                return "".join(out)
            out.append(text[position:start])
            out.append("\n" * text.count("\n", start, end))
            position = end + 3
    if language not in ("kotlin-like", "js-like", "css"):
        return text

    c_like = language != "css"
    quotes = "\"'`" if c_like else "\"'"
    out = []
    position = 0
    while position < len(text):
        char = text[position]
        if c_like and text.startswith("//", position):
            newline = text.find("\n", position)
            position = len(text) if newline < 0 else newline
            continue
        if text.startswith("/*", position):
            close = text.find("*/", position + 2)
            if close >= 0:
                out.append("\n" * text.count("\n", position, close))
                position = close + 2
                continue
        if char in quotes:
            end = _string_end(text, position, allow_backtick=c_like)
            if end is not None:
                chunk = text[position:end]
                if keep_strings:
                    out.append(chunk)
                else:
                    width = 3 if chunk.startswith('"""') and len(chunk) >= 6 else 1
                    inner = "".join(c if c == "\n" else " " for c in chunk[width:-width])
                    out.append(chunk[:width] + inner + chunk[-width:])
                position = end
                continue
        out.append(char)
        position += 1
    return "".join(out)


# ==================== TokenSeq / Regex ====================

def naive_tokens(text: str) -> List[Tuple[str, int]]:
    tokens = []
    line = 1
    position = 0
    size = len(text)
    while position < size:
        char = text[position]
        if char == "\n":
            line += 1
            position += 1
            continue
        if char.isspace() or char in "\"'`":
            position += 1
            continue
        end = position + 1
        if _is_ident_start(char):
            while end < size and _is_ident_part(text[end]):
                end += 1
        elif char.isdigit():
            while end < size and text[end].isdigit():
                end += 1
            if end + 1 < size and text[end] == "." and text[end + 1].isdigit():
                end += 1
                while end < size and text[end].isdigit():
                    end += 1
            if end < size and text[end] == "%":
                end += 1
        tokens.append((text[position:end], line))
        position = end
    return tokens


def tokenseq_spans(text: str, language: str, payload: str) -> List[Tuple[int, int]]:
    needle = [token for token, _ in naive_tokens(payload)]
    haystack = naive_tokens(scrub(text, language, keep_strings=True))
    spans = []
    for start in range(len(haystack) - len(needle) + 1):
        window = haystack[start:start + len(needle)]
        if [token for token, _ in window] == needle:
            spans.append((window[0][1], window[-1][1]))
    return spans


def regex_spans(text: str, language: str, pattern: str) -> List[Tuple[int, int]]:
    compiled = re.compile(pattern)
    spans = []
    for number, line in enumerate(scrub(text, language, keep_strings=True).split("\n"), start=1):
        if compiled.search(" ".join(line.split())):
            spans.append((number, number))
    return spans


# ==================== 花括号指标 ====================

def _words(text: str) -> List[str]:
    cleaned = "".join(c if _is_ident_part(c) else " " for c in text)
    return cleaned.split()


def _leading_word(text: str) -> str:
    end = 0
    while end < len(text) and _is_ident_part(text[end]):
        end += 1
    return text[:end]


def _classify(header: str) -> Tuple[str, str]:
    lines = [line.strip() for line in header.split("\n") if line.strip()]
    text = lines[-1] if lines else ""
    if not text:
        return "block", ""
    if _leading_word(text) in CONTROL_WORDS:
        return "control", _leading_word(text)

    for index, word in enumerate(text.split()):
        if word in CLASS_WORDS:
            rest = text.split()[index + 1] if index + 1 < len(text.split()) else ""
            return "class", _leading_word(rest) or "<anonymous>"
        if not word.isidentifier():
            break

    words = _words(text)
    for keyword in ("fun", "function"):
        if keyword in words:
            after = text.split(keyword, 1)[1].strip()
            return "function", _leading_word(after) or "<anonymous>"
    if text.endswith("=>"):
        before = text.split("=", 1)[0].split() if "=" in text[:-2] else []
        return "function", before[-1] if before else "<lambda>"
    if text.endswith(")") and "(" in text:
        prefix = text.split("(", 1)[0].split()
        if prefix and all(word.isidentifier() for word in prefix) and prefix[-1] not in CONTROL_WORDS:
            return "function", prefix[-1]
    return "block", ""


def scan(masked: str) -> List[Dict]:
    """全部块：kind / name / depth / 开闭位置和行号"""
    blocks: List[Dict] = []
    stack: List[Dict] = []
    boundary = 0
    line = 1
    for position, char in enumerate(masked):
        if char == "\n":
            line += 1
        elif char == "{":
            kind, name = _classify(masked[boundary:position])
            block = {"kind": kind, "name": name, "depth": len(stack) + 1,
                     "open": position, "open_line": line, "stack": list(stack)}
            blocks.append(block)
            stack.append(block)
            boundary = position + 1
        elif char == "}":
            block = stack.pop()
            block["close"] = position
            block["close_line"] = line
            boundary = position + 1
        elif char == ";":
            boundary = position + 1
    assert not stack, "夹具的花括号必须配平"
    return blocks


def count_decisions(body: str) -> int:
    count = 0
    position = 0
    size = len(body)
    while position < size:
        char = body[position]
        if _is_ident_start(char):
            end = position
            while end < size and _is_ident_part(body[end]):
                end += 1
            if body[position:end] in DECISION_WORDS:
                count += 1
            position = end
            continue
        if body[position:position + 2] in ("&&", "||"):
            count += 1
            position += 2
            continue
        if char == "?":
            before = body[position - 1] if position else ""
            after = body[position + 1] if position + 1 < size else ""
            if (before.isspace() or before == ")") and (not after or after not in TERNARY_FORBIDDEN_NEXT):
                count += 1
        position += 1
    return count


def _loc(masked: str, first: int, last: int) -> int:
    return sum(1 for line in masked.split("\n")[first - 1:last] if line.strip())


def brace_metrics(text: str, language: str) -> Dict:
    """
    Returns:
        dict: functions（name, class_name, start_line, end_line, depth, complexity, loc）、
              classes（class_name, methods, wmc, loc）、max_depth
    """
    masked = scrub(text, language, keep_strings=False)
    blocks = scan(masked)

    functions = []
    for block in blocks:
        if block["kind"] != "function" or any(b["kind"] == "function" for b in block["stack"]):
            continue
        inner = [b for b in blocks if block["open"] < b["open"] < block["close"]]
        depth = max([b["depth"] - block["depth"] + 1 for b in inner] + [1])
        owners = [b for b in block["stack"] if b["kind"] == "class"]
        functions.append({
            "name": block["name"],
            "class_name": owners[-1]["name"] if owners else TOPLEVEL,
            "start_line": block["open_line"],
            "end_line": block["close_line"],
            "depth": depth,
            "complexity": 1 + count_decisions(masked[block["open"] + 1:block["close"]]),
            "loc": _loc(masked, block["open_line"], block["close_line"]),
            "_owner": owners[-1]["open"] if owners else None,
        })

    classes = []
    for block in blocks:
        if block["kind"] != "class" or any(b["kind"] == "function" for b in block["stack"]):
            continue
        methods = [f for f in functions if f["_owner"] == block["open"]]
        classes.append({
            "class_name": block["name"],
            "methods": len(methods),
            "wmc": sum(f["complexity"] for f in methods),
            "loc": _loc(masked, block["open_line"], block["close_line"]),
        })
    loose = [f for f in functions if f["_owner"] is None]
    if loose:
        classes.append({
            "class_name": TOPLEVEL,
            "methods": len(loose),
            "wmc": sum(f["complexity"] for f in loose),
            "loc": sum(f["loc"] for f in loose),
        })

    if functions:
        max_depth = max(f["depth"] for f in functions)
    else:
        max_depth = max((b["depth"] for b in blocks), default=0)
    for function in functions:
        del function["_owner"]
    return {"functions": functions, "classes": classes, "max_depth": max_depth}


def dead_code_spans(text: str, language: str) -> List[Tuple[int, int]]:
    """逐行扫描：终止语句所在行之后、同一块内的行，直到块结束或下一个 case/default 标签"""
    masked = scrub(text, language, keep_strings=False)
    # 每个块的状态: [已终止, 首行, 末行]
    stack = [[False, None, None]]
    spans: List[Tuple[int, int]] = []

    def close(state) -> None:
        if state[1] is not None:
            spans.append((state[1], state[2]))
        state[0], state[1], state[2] = False, None, None

    def touch(state, number: int) -> None:
        if state[0]:
            if state[1] is None:
                state[1] = number
            state[2] = number

    for number, raw in enumerate(masked.split("\n"), start=1):
        text_line = raw.strip()
        while text_line.startswith("}"):
            if len(stack) > 1:
                close(stack.pop())
            touch(stack[-1], number)
            text_line = text_line[1:].lstrip()
        if not text_line:
            continue

        state = stack[-1]
        word = _leading_word(text_line)
        arm = False
        if word in LABEL_WORDS:
            close(state)
        elif word in TERMINATOR_WORDS and not state[0]:
            arm = True
        else:
            touch(state, number)

        for char in text_line:
            if char == "{":
                stack.append([False, None, None])
            elif char == "}" and len(stack) > 1:
                close(stack.pop())
        if arm:
            state[0] = True

    while stack:
        close(stack.pop())
    return sorted(spans)
