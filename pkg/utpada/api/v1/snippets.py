from typing import Optional

from fastapi import APIRouter, Depends, HTTPException, Query, status

from utpada.core.dependencies import get_bank, get_current_reviewer, get_current_user
from utpada.core.exceptions import (
    AlreadyCurated,
    DuplicateBody,
    EmptyQuery,
    InvalidDraft,
    SnippetNotFound,
)
from utpada.models.snippet_dto import CurateRequest, SearchResponse, Snippet, SnippetDraft
from utpada.services.snippet_service import SnippetBankService

router = APIRouter()


@router.get("/search", response_model=SearchResponse, summary="关键词检索")
async def search_snippets(
    q: str = Query(..., description="查询文本"),
    limit: Optional[int] = Query(None, gt=0),
    bank: SnippetBankService = Depends(get_bank),
):
    """只检索已入库（Curated）的片段"""
    try:
        hits = bank.search(q, limit)
    except EmptyQuery as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=e.message)
    return SearchResponse(query=q, hits=hits, count=len(hits))


@router.get("/{snippet_id}", response_model=Snippet, summary="获取片段")
async def get_snippet(snippet_id: str, bank: SnippetBankService = Depends(get_bank)):
    try:
        return bank.lookup(snippet_id)
    except SnippetNotFound as e:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=e.message)


@router.post("", response_model=Snippet, status_code=status.HTTP_201_CREATED, summary="提交候选片段")
async def add_snippet(
    draft: SnippetDraft,
    bank: SnippetBankService = Depends(get_bank),
    current_user: dict = Depends(get_current_user),
):
    """新片段进入待审核队列；内容与已有片段相同时返回 409 并给出已有ID"""
    try:
        return bank.add_snippet(draft)
    except DuplicateBody as e:
        raise HTTPException(status_code=status.HTTP_409_CONFLICT,
                            detail={"message": e.message, "existing_id": e.existing_id})
    except SnippetNotFound as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=e.message)
    except InvalidDraft as e:
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=e.message)


@router.post("/{snippet_id}/curate", response_model=Snippet, summary="审核片段")
async def curate_snippet(
    snippet_id: str,
    request: CurateRequest,
    bank: SnippetBankService = Depends(get_bank),
    current_user: dict = Depends(get_current_reviewer),
):
    """approve=true 入库，false 驳回并归档（需要 reviewer 角色）"""
    try:
        return bank.curate(snippet_id, request.approve)
    except SnippetNotFound as e:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=e.message)
    except AlreadyCurated as e:
        raise HTTPException(status_code=status.HTTP_409_CONFLICT, detail=e.message)
