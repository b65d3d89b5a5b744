import re
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utpada.utils.source_normalizer import tokenize_payload

SNIPPET_ID_RE = re.compile(r"^SNIP-\d{6}$")


class PatternKind(str, Enum):
    TOKENSEQ = "tokenseq"
    REGEX = "regex"
    CSSDECL = "cssdecl"


class PatternRole(str, Enum):
    REQUIRED = "required"
    ANTI = "anti"


class CssPredicate(str, Enum):
    EQUALS = "equals"
    NOT_EQUALS = "not-equals"
    PRESENT = "present"
    ABSENT = "absent"


class CssDecl(BaseModel):
    """CSS 声明检查：(选择器, 属性名, 取值谓词)"""
    model_config = ConfigDict(frozen=True)

    selector: str = Field(..., description="选择器文本")
    property: str = Field(..., description="属性名")
    predicate: CssPredicate = Field(..., description="取值谓词")
    value: Optional[str] = Field(None, description="equals / not-equals 的比较值")

    @field_validator("property")
    @classmethod
    def validate_property(cls, v):
        if not v.strip():
            raise ValueError("CssDecl 属性名不能为空")
        return v.strip()

    @field_validator("selector")
    @classmethod
    def validate_selector(cls, v):
        if not v.strip():
            raise ValueError("CssDecl 选择器不能为空")
        return v.strip()

    @model_validator(mode="after")
    def validate_value(self):
        needs_value = self.predicate in (CssPredicate.EQUALS, CssPredicate.NOT_EQUALS)
        if needs_value and self.value is None:
            raise ValueError(f"谓词 {self.predicate.value} 需要比较值")
        if not needs_value and self.value is not None:
            raise ValueError(f"谓词 {self.predicate.value} 不接受比较值")
        return self

    def to_payload(self) -> str:
        if self.predicate == CssPredicate.EQUALS:
            condition = f"={self.value}"
        elif self.predicate == CssPredicate.NOT_EQUALS:
            condition = f"!={self.value}"
        else:
            condition = self.predicate.value
        return f"{self.selector} :: {self.property} :: {condition}"


class Pattern(BaseModel):
    """检测模式；payload 保存 match: 行的原文（已压缩空白）"""
    model_config = ConfigDict(frozen=True)

    kind: PatternKind
    payload: str
    tokens: Tuple[str, ...] = ()
    css: Optional[CssDecl] = None

    @model_validator(mode="after")
    def validate_payload(self):
        if self.kind == PatternKind.TOKENSEQ:
            if not self.tokens or list(self.tokens) != tokenize_payload(self.payload):
                raise ValueError("TokenSeq 至少需要一个 token")
        elif self.kind == PatternKind.REGEX:
            try:
                re.compile(self.payload)
            except re.error as e:
                raise ValueError(f"正则无法编译: {e}")
        elif self.css is None:
            raise ValueError("CssDecl 缺少声明")
        return self


class ValidationCase(BaseModel):
    """验证用例：一条可用性规范 + 检测模式 + 修复片段"""
    model_config = ConfigDict(frozen=True)

    case_id: str = Field(..., description="用例ID")
    guideline_id: str = Field(..., description="需求/规范ID，例如 REQ-21890")
    description: str = Field("", description="描述")
    applies_to: Tuple[str, ...] = Field(..., description="适用文件 glob（相对源码根目录）")
    required_patterns: Tuple[Pattern, ...] = ()
    anti_patterns: Tuple[Pattern, ...] = ()
    remediation_snippet_ids: Tuple[str, ...] = ()

    @field_validator("case_id", "guideline_id")
    @classmethod
    def validate_identifier(cls, v):
        if not v or re.search(r"\s", v):
            raise ValueError("标识符不能为空且不能包含空白")
        return v

    @field_validator("applies_to")
    @classmethod
    def validate_applies_to(cls, v):
        if not v:
            raise ValueError("applies 至少需要一个 glob")
        return v

    @field_validator("remediation_snippet_ids")
    @classmethod
    def validate_remediation(cls, v):
        for snippet_id in v:
            if not SNIPPET_ID_RE.match(snippet_id):
                raise ValueError(f"片段ID格式错误: {snippet_id}")
        return v

    @model_validator(mode="after")
    def validate_patterns(self):
        if not self.required_patterns and not self.anti_patterns:
            raise ValueError("required / anti 模式不能同时为空")
        return self

    def patterns(self) -> List[Tuple[PatternRole, Pattern]]:
        return ([(PatternRole.REQUIRED, p) for p in self.required_patterns]
                + [(PatternRole.ANTI, p) for p in self.anti_patterns])
