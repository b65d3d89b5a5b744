import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

from pydantic import ValidationError

from utpada.config import settings
from utpada.core.exceptions import (
    AlreadyCurated,
    DuplicateBody,
    EmptyQuery,
    InvalidDraft,
)
from utpada.database.snippet_store import SnippetStore
from utpada.models.snippet_dto import SearchHit, Snippet, SnippetDraft, SnippetStatus

logger = logging.getLogger(__name__)

_TERM_SPLIT_RE = re.compile(r"[^a-z0-9]+")

# 关键词 -> 已入库片段ID集合
KeywordIndex = Dict[str, Set[str]]


def query_terms(query: str) -> List[str]:
    """小写后按非字母数字切分，去重并保持顺序"""
    terms: List[str] = []
    for term in _TERM_SPLIT_RE.split(query.lower()):
        if term and term not in terms:
            terms.append(term)
    return terms


def build_keyword_index(snippets: Dict[str, Snippet]) -> KeywordIndex:
    index: KeywordIndex = {}
    for snippet in snippets.values():
        if snippet.status != SnippetStatus.CURATED:
            continue
        for keyword in snippet.keywords:
            index.setdefault(keyword, set()).add(snippet.snippet_id)
    return index


class SnippetBankService:
    """
    代码片段库服务：提交、审核、关键词检索与修复推荐

    只有已入库（Curated）的片段可以被检索和推荐；候选片段处于待审核队列。
    """

    def __init__(self, root: Union[str, Path, None] = None,
                 keyword_weight: Optional[int] = None,
                 substring_weight: Optional[int] = None):
        self.store = SnippetStore(root or settings.BANK)
        self.keyword_weight = keyword_weight or settings.SEARCH_KEYWORD_WEIGHT
        self.substring_weight = substring_weight or settings.SEARCH_SUBSTRING_WEIGHT
        # (快照, 索引) 作为一个整体替换，检索不会看到写了一半的状态
        self._view: Tuple[Dict[str, Snippet], KeywordIndex] = ({}, {})
        self.refresh()

    def refresh(self) -> Tuple[Dict[str, Snippet], KeywordIndex]:
        """同步其他进程对片段库的改动，只更新内存中的检索视图"""
        self.store.refresh()
        snapshot = self.store.snapshot()
        if snapshot is not self._view[0]:
            self._view = (snapshot, build_keyword_index(snapshot))
        return self._view

    def _publish(self) -> None:
        """写操作之后更新视图并重写 index.tsv（在 store.writing() 内调用）"""
        snapshot = self.store.snapshot()
        index = build_keyword_index(snapshot)
        self._view = (snapshot, index)
        self.store.write_index(
            (keyword, snippet_id)
            for keyword in sorted(index)
            for snippet_id in sorted(index[keyword])
        )

    def rebuild_index(self) -> int:
        """从片段文件重建 index.tsv，返回索引中的关键词数"""
        with self.store.writing():
            self._publish()
        return len(self._view[1])

    def add_snippet(self, draft: Union[SnippetDraft, dict]) -> Snippet:
        """
        提交新片段（状态为 Candidate）

        Raises:
            InvalidDraft: 字段不合法
            DuplicateBody: 已有逐字节相同的片段，existing_id 为已有ID
        """
        if isinstance(draft, dict):
            try:
                draft = SnippetDraft(**draft)
            except ValidationError as e:
                raise InvalidDraft(e.errors()[0]["msg"].removeprefix("Value error, "))

        with self.store.writing():
            existing_id = self.store.find_body(draft.body)
            if existing_id is not None:
                logger.info(f"片段内容重复，返回已有片段: {existing_id}")
                raise DuplicateBody(existing_id)
            if draft.supersedes is not None:
                self.store.get(draft.supersedes)
            snippet = self.store.insert(draft)
            self._publish()

        logger.info(f"新增候选片段: {snippet.snippet_id} ({snippet.title})")
        return snippet

    def curate(self, snippet_id: str, approve: bool) -> Snippet:
        """
        审核候选片段

        approve=True 时状态变为 Curated；否则从索引中移除并写入归档日志。

        Raises:
            SnippetNotFound: 片段不存在
            AlreadyCurated: 片段已入库
        """
        with self.store.writing():
            snippet = self.store.get(snippet_id)
            if snippet.status == SnippetStatus.CURATED:
                raise AlreadyCurated(snippet_id)
            if approve:
                snippet = self.store.replace(snippet.model_copy(update={"status": SnippetStatus.CURATED}))
                logger.info(f"片段审核通过: {snippet_id}")
            else:
                self.store.archive(snippet, reason="rejected")
                logger.info(f"片段被驳回并归档: {snippet_id}")
            self._publish()
        return snippet

    def lookup(self, snippet_id: str) -> Snippet:
        """按ID精确获取；已归档的片段抛 SnippetNotFound(archived=True)"""
        self.store.refresh()
        return self.store.get(snippet_id)

    def exists(self, snippet_id: str) -> bool:
        self.store.refresh()
        return self.store.exists(snippet_id)

    def search(self, query: str, limit: Optional[int] = None) -> List[SearchHit]:
        """
        关键词检索

        每个查询词：等于某个关键词得 keyword_weight 分，否则是标题或正文的子串得
        substring_weight 分；按 (得分降序, 片段ID升序) 排序，零分不返回。

        Args:
            query: 自由文本
            limit: 最多返回条数

        Returns:
            List[SearchHit]: 检索结果
        """
        limit = limit if limit is not None else settings.SEARCH_DEFAULT_LIMIT
        if limit <= 0:
            raise ValueError("limit 必须为正整数")
        terms = query_terms(query)
        if not terms:
            raise EmptyQuery("查询不能为空")

        snapshot, index = self.refresh()
        hits: List[SearchHit] = []
        for snippet_id, snippet in snapshot.items():
            if snippet.status != SnippetStatus.CURATED:
                continue
            title = snippet.title.lower()
            body = snippet.body.lower()
            score = 0
            matched: List[str] = []
            for term in terms:
                if snippet_id in index.get(term, ()):
                    score += self.keyword_weight
                    matched.append(term)
                elif term in title or term in body:
                    score += self.substring_weight
            if score > 0:
                hits.append(SearchHit(snippet_id=snippet_id, title=snippet.title,
                                      score=score, matched_keywords=matched))

        hits.sort(key=lambda hit: (-hit.score, hit.snippet_id))
        logger.info(f"检索 '{query}': 命中 {len(hits)} 个片段")
        return hits[:limit]

    def recommend(self, snippet_ids: Tuple[str, ...]) -> List[str]:
        """保持用例中的顺序，只返回库中存在且已入库的片段"""
        snapshot, _ = self.refresh()
        return [
            snippet_id for snippet_id in snippet_ids
            if snippet_id in snapshot and snapshot[snippet_id].status == SnippetStatus.CURATED
        ]
