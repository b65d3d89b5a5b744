import logging
from contextlib import asynccontextmanager
from typing import Optional

import uvicorn
from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from utpada.config import settings
from utpada.core.exceptions import StoreCorrupt, StoreError, UtpadaError
from utpada.core.router_registry import auto_register_routers

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(application: FastAPI):
    logger.info(f"Metric DB: {settings.DB}，片段库: {settings.BANK}，用例: {settings.CASES}")
    yield


def register_exception_handlers(application: FastAPI) -> None:
    """路由里没有单独处理的领域错误统一转成 JSON"""

    @application.exception_handler(StoreError)
    async def store_error_handler(request: Request, exc: StoreError):
        code = status.HTTP_503_SERVICE_UNAVAILABLE if isinstance(exc, StoreCorrupt) else status.HTTP_409_CONFLICT
        logger.error(f"{request.url.path}: {exc.message}")
        return JSONResponse(status_code=code, content={"detail": exc.message})

    @application.exception_handler(UtpadaError)
    async def domain_error_handler(request: Request, exc: UtpadaError):
        logger.warning(f"{request.url.path}: {exc.message}")
        return JSONResponse(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, content={"detail": exc.message})


def create_application() -> FastAPI:
    """创建FastAPI应用"""
    logging.basicConfig(level=settings.LOG_LEVEL, format=LOG_FORMAT)

    application = FastAPI(
        title=settings.APP_NAME,
        version=settings.APP_VERSION,
        debug=settings.DEBUG,
        lifespan=lifespan,
    )

    application.add_middleware(
        CORSMiddleware,
        allow_origins=settings.CORS_ORIGINS,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    register_exception_handlers(application)

    # 自动注册 api/v1 下的路由
    auto_register_routers(application)

    @application.get("/")
    async def root():
        return {
            "message": settings.APP_NAME,
            "version": settings.APP_VERSION,
            "api": settings.API_PREFIX,
            "status": "running",
        }

    return application


app = create_application()


def serve(host: Optional[str] = None, port: Optional[int] = None) -> None:
    uvicorn.run(
        "utpada.main:app",
        host=host or settings.API_HOST,
        port=port or settings.API_PORT,
        reload=settings.DEBUG,
    )


if __name__ == "__main__":
    serve()
