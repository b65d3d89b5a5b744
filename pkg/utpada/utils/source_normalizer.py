import re
from dataclasses import dataclass
from pathlib import PurePosixPath
from typing import List, Optional

CSS = "css"
HTML = "html"
KOTLIN_LIKE = "kotlin-like"
JS_LIKE = "js-like"
OTHER = "other"

BRACE_LANGUAGES = (KOTLIN_LIKE, JS_LIKE)

# 扩展名 -> language_tag；不在表中的文件不会被加载
LANGUAGE_BY_EXTENSION = {
    ".css": CSS,
    ".html": HTML,
    ".htm": HTML,
    ".kt": KOTLIN_LIKE,
    ".kts": KOTLIN_LIKE,
    ".java": KOTLIN_LIKE,
    ".swift": KOTLIN_LIKE,
    ".cs": KOTLIN_LIKE,
    ".scala": KOTLIN_LIKE,
    ".m": KOTLIN_LIKE,
    ".rs": KOTLIN_LIKE,
    ".js": JS_LIKE,
    ".jsx": JS_LIKE,
    ".mjs": JS_LIKE,
    ".ts": JS_LIKE,
    ".tsx": JS_LIKE,
    ".lua": OTHER,
    ".xml": OTHER,
    ".json": OTHER,
    ".txt": OTHER,
    ".md": OTHER,
    ".properties": OTHER,
    ".gradle": OTHER,
    ".yaml": OTHER,
    ".yml": OTHER,
}

# 标识符 | 数字（可带百分号）| 单个标点；引号只作为分隔符
TOKEN_RE = re.compile(r"(?:[^\W\d]|\$)[\w$]*|\d+(?:\.\d+)?%?|[^\w\s\"'`]")
_WHITESPACE_RE = re.compile(r"\s+")

_C_LIKE_RE = re.compile(
    r'"""[\s\S]*?"""'
    r'|"(?:\\.|[^"\\\n])*"'
    r"|'(?:\\.|[^'\\\n])*'"
    r"|`(?:\\.|[^`\\])*`"
    r"|//[^\n]*"
    r"|/\*[\s\S]*?\*/"
)
_CSS_RE = re.compile(
    r'"(?:\\.|[^"\\\n])*"'
    r"|'(?:\\.|[^'\\\n])*'"
    r"|/\*[\s\S]*?\*/"
)
_HTML_RE = re.compile(r"<!--[\s\S]*?-->")

_COMMENT_SYNTAX = {
    CSS: _CSS_RE,
    HTML: _HTML_RE,
    KOTLIN_LIKE: _C_LIKE_RE,
    JS_LIKE: _C_LIKE_RE,
}


@dataclass(frozen=True)
class Token:
    text: str
    line: int


def language_for(path: str) -> Optional[str]:
    """根据扩展名推断 language_tag，无法识别时返回 None"""
    return LANGUAGE_BY_EXTENSION.get(PurePosixPath(path).suffix.lower())


def is_binary(data: bytes) -> bool:
    return b"\x00" in data[:8192]


def _is_comment(text: str) -> bool:
    return text.startswith("//") or text.startswith("/*") or text.startswith("<!--")


def strip_comments(text: str, language_tag: str) -> str:
    """
    去除注释，保留换行，保证行号不变

    字符串字面量里的注释符号不算注释；未知语言只做原样返回。
    """
    syntax = _COMMENT_SYNTAX.get(language_tag)
    if syntax is None:
        return text

    def replacer(match: re.Match) -> str:
        chunk = match.group(0)
        if _is_comment(chunk):
            return "\n" * chunk.count("\n")
        return chunk

    return syntax.sub(replacer, text)


def mask_code(text: str, language_tag: str) -> str:
    """去注释并把字符串内容替换为空格（保留引号和换行），供花括号扫描使用"""
    syntax = _COMMENT_SYNTAX.get(language_tag)
    if syntax is None:
        return text

    def replacer(match: re.Match) -> str:
        chunk = match.group(0)
        if _is_comment(chunk):
            return "\n" * chunk.count("\n")
        quote = 3 if chunk.startswith('"""') else 1
        inner = re.sub(r"[^\n]", " ", chunk[quote:-quote])
        return chunk[:quote] + inner + chunk[-quote:]

    return syntax.sub(replacer, text)


def collapse_whitespace(text: str) -> str:
    return _WHITESPACE_RE.sub(" ", text).strip()


def normalize_lines(text: str) -> List[str]:
    """逐行压缩空白；第 i 个元素对应源文件第 i+1 行"""
    return [collapse_whitespace(line) for line in text.split("\n")]


def tokenize(text: str) -> List[Token]:
    """按标识符/标点边界切分，记录每个 token 所在行号（从 1 开始）"""
    tokens: List[Token] = []
    line = 1
    position = 0
    for match in TOKEN_RE.finditer(text):
        line += text.count("\n", position, match.start())
        position = match.start()
        tokens.append(Token(match.group(0), line))
    return tokens


def tokenize_payload(payload: str) -> List[str]:
    return [token.text for token in tokenize(payload)]
