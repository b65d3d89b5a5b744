from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Dict, List, Optional


class Settings(BaseSettings):
    """应用配置（环境变量前缀 UTPADA_，例如 UTPADA_DB）"""
    # 应用配置
    APP_NAME: str = "Utpada"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # API配置
    API_HOST: str = "0.0.0.0"
    API_PORT: int = 8000
    API_PREFIX: str = "/api/v1"
    CORS_ORIGINS: List[str] = ["*"]

    # 存储路径（CLI 的 --db/--bank/--cases 会覆盖）
    DB: str = "./data/metric.db"
    DB_FSYNC: bool = True
    BANK: str = "./data/bank"
    CASES: str = "./data/cases"

    # 验证引擎
    CASE_EXTENSION: str = ".vcase"
    MAX_FILE_BYTES: int = 10 * 1024 * 1024
    VALIDATION_WORKERS: int = 4

    # 代码片段库检索
    SEARCH_KEYWORD_WEIGHT: int = 3
    SEARCH_SUBSTRING_WEIGHT: int = 1
    SEARCH_DEFAULT_LIMIT: int = 10

    # 冲刺周期 / RSI
    SPRINT_WORKING_DAYS: int = 6
    RSI_PASS_BENCHMARK: float = 6.5
    EXCEPTIONAL_MEAN: float = 8.5
    EXCEPTIONAL_PASS_RATE: float = 0.9
    # 为空表示 8 个评审类别等权
    REVIEW_CATEGORY_WEIGHTS: Dict[str, float] = {}

    # 脱敏密钥（mask 命令未显式传 --key 时使用）
    MASK_KEY: Optional[str] = None

    # JWT配置
    JWT_SECRET_KEY: str = "your-secret-key-change-in-production"  # 生产环境要修改
    JWT_ALGORITHM: str = "HS256"
    JWT_ACCESS_TOKEN_EXPIRE_MINUTES: int = 60 * 24  # token过期时间（分钟）

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="UTPADA_",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
