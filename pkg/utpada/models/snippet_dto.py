import re
from datetime import datetime
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator

from utpada.models.valcase_dto import SNIPPET_ID_RE

KEYWORD_RE = re.compile(r"[a-z0-9]+")


class SnippetStatus(str, Enum):
    """片段状态"""
    CANDIDATE = "Candidate"
    CURATED = "Curated"


class SubmitterRole(str, Enum):
    """提交者角色"""
    DEVELOPER = "developer"
    UX = "ux"
    QA = "qa"
    REVIEWER = "reviewer"


class SnippetDraft(BaseModel):
    """新增片段请求（还没有ID和状态）"""
    title: str = Field(..., description="标题")
    language_tag: str = Field("other", description="语言标签")
    keywords: List[str] = Field(..., description="关键词（统一小写）")
    guideline_ids: List[str] = Field(default_factory=list, description="关联的规范ID")
    body: str = Field(..., description="代码原文")
    submitted_by_role: SubmitterRole = Field(SubmitterRole.DEVELOPER, description="提交者角色")
    supersedes: Optional[str] = Field(None, description="被替代的片段ID")

    @field_validator("title", "language_tag")
    @classmethod
    def validate_single_line(cls, v):
        if "\n" in v or "\r" in v:
            raise ValueError("不能包含换行")
        return v.strip()

    @field_validator("keywords")
    @classmethod
    def validate_keywords(cls, v):
        keywords = []
        for keyword in v:
            keyword = keyword.strip().lower()
            if not keyword:
                continue
            # 检索词按非字母数字切分，关键词必须能被整词命中
            if not KEYWORD_RE.fullmatch(keyword):
                raise ValueError(f"关键词只能包含小写字母和数字: {keyword!r}")
            if keyword not in keywords:
                keywords.append(keyword)
        if not keywords:
            raise ValueError("关键词不能为空")
        return keywords

    @field_validator("guideline_ids")
    @classmethod
    def validate_guidelines(cls, v):
        return [g.strip() for g in v if g.strip()]

    @field_validator("body")
    @classmethod
    def validate_body(cls, v):
        if not v.strip():
            raise ValueError("代码内容不能为空")
        return v

    @field_validator("supersedes")
    @classmethod
    def validate_supersedes(cls, v):
        if v is not None and not SNIPPET_ID_RE.match(v):
            raise ValueError(f"片段ID格式错误: {v}")
        return v


class Snippet(SnippetDraft):
    """代码片段库中的片段"""
    snippet_id: str = Field(..., description="片段ID，格式 SNIP-xxxxxx")
    status: SnippetStatus = Field(SnippetStatus.CANDIDATE, description="状态")
    created_at: datetime = Field(..., description="创建时间")


class SearchHit(BaseModel):
    snippet_id: str
    title: str
    score: int = Field(..., gt=0, description="得分")
    matched_keywords: List[str] = Field(default_factory=list)


class SearchResponse(BaseModel):
    query: str
    hits: List[SearchHit]
    count: int


class CurateRequest(BaseModel):
    approve: bool = Field(..., description="true 入库，false 驳回归档")
