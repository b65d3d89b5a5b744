from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional

from fastapi import Depends, HTTPException, status
from fastapi.security import HTTPAuthorizationCredentials, HTTPBearer

from utpada.config import settings
from utpada.core.exceptions import StoreError
from utpada.database.metric_db import MetricDb
from utpada.models.snippet_dto import SubmitterRole
from utpada.services.snippet_service import SnippetBankService
from utpada.tools.security import JWTManager

# HTTPBearer 从 Authorization 头中提取 Bearer token
security = HTTPBearer()


@lru_cache(maxsize=1)
def get_bank() -> SnippetBankService:
    """整个进程共用一个片段库服务（写操作内部串行）"""
    return SnippetBankService(settings.BANK)


def get_report_bank() -> Optional[SnippetBankService]:
    """报告只读片段库；目录还不存在时返回 None（按ID格式判断）"""
    if not Path(settings.BANK).is_dir():
        return None
    return get_bank()


def get_metric_db() -> Iterator[MetricDb]:
    """
    只读打开 Metric DB

    每个请求读取一次当前快照，不持有写锁，不影响 CLI 写入。
    """
    try:
        db = MetricDb.open(settings.DB, read_only=True)
    except StoreError as e:
        raise HTTPException(status_code=status.HTTP_503_SERVICE_UNAVAILABLE, detail=e.message)
    try:
        yield db
    finally:
        db.close()


async def get_current_user(credentials: HTTPAuthorizationCredentials = Depends(security)) -> dict:
    """
    获取当前用户

    参数:
        credentials: 包含 token 的认证凭证

    返回:
        dict: token 载荷（sub 为用户ID，role 为角色）

    异常:
        HTTPException: token 无效或过期
    """
    payload = JWTManager.verify_token(credentials.credentials)
    if payload is None:
        raise HTTPException(
            status_code=status.HTTP_401_UNAUTHORIZED,
            detail="无效的token",
            headers={"WWW-Authenticate": "Bearer"},
        )
    return payload


async def get_current_reviewer(current_user: dict = Depends(get_current_user)) -> dict:
    """片段审核只允许 reviewer 角色"""
    if current_user["role"] != SubmitterRole.REVIEWER.value:
        raise HTTPException(status_code=status.HTTP_403_FORBIDDEN, detail="需要评审人权限")
    return current_user
