from datetime import datetime
from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = Field(..., description="服务状态")
    timestamp: datetime = Field(..., description="检查时间")
    version: str = Field(..., description="API版本")


class Diagnostic(BaseModel):
    """非致命问题：读取失败、二进制文件、语言不匹配、记录被跳过等"""
    code: str = Field(..., description="诊断类型，例如 IoError / BinaryFile / LanguageMismatch")
    message: str = Field(..., description="说明")
    path: Optional[str] = Field(None, description="相关文件")
    case_id: Optional[str] = Field(None, description="相关用例")
    record_id: Optional[str] = Field(None, description="相关记录")
