from datetime import datetime, timedelta, timezone
from typing import Dict, Optional

from cryptography.hazmat.primitives import hashes, hmac
from jose import JWTError, jwt

from utpada.config import settings
from utpada.models.snippet_dto import SubmitterRole

MASK_PREFIX = "anon-"
MASK_LENGTH = 12


# JWT工具类
class JWTManager:
    @staticmethod
    def create_access_token(subject: str, role: SubmitterRole,
                            expires_delta: Optional[timedelta] = None) -> str:
        """创建访问token，sub 为参与者/评审人ID，role 决定能否审核片段"""
        expire = datetime.now(timezone.utc) + (
            expires_delta or timedelta(minutes=settings.JWT_ACCESS_TOKEN_EXPIRE_MINUTES)
        )
        to_encode = {"sub": subject, "role": SubmitterRole(role).value, "exp": expire}
        return jwt.encode(to_encode, settings.JWT_SECRET_KEY, algorithm=settings.JWT_ALGORITHM)

    @staticmethod
    def verify_token(token: str) -> Optional[dict]:
        """验证token，无效或过期返回 None"""
        try:
            payload = jwt.decode(token, settings.JWT_SECRET_KEY, algorithms=[settings.JWT_ALGORITHM])
        except JWTError:
            return None
        if not payload.get("sub") or payload.get("role") not in {r.value for r in SubmitterRole}:
            return None
        return payload


# 脱敏工具
class IdMasker:
    """
    用 HMAC-SHA256 把参与者/评审人ID替换为不可逆的稳定标记

    同一个 key 下同一个ID总是得到同一个标记，因此脱敏后的日志仍可按人聚合。
    """

    def __init__(self, key: str):
        if not key:
            raise ValueError("脱敏密钥不能为空")
        self._key = key.encode("utf-8")
        self._cache: Dict[str, str] = {}

    def mask(self, identifier: str) -> str:
        token = self._cache.get(identifier)
        if token is None:
            digest = hmac.HMAC(self._key, hashes.SHA256())
            digest.update(identifier.encode("utf-8"))
            token = MASK_PREFIX + digest.finalize().hex()[:MASK_LENGTH]
            self._cache[identifier] = token
        return token
