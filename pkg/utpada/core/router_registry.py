import importlib
import logging
import pkgutil

from fastapi import APIRouter, FastAPI

from utpada.config import settings

logger = logging.getLogger(__name__)


def auto_register_routers(app: FastAPI, package_name: str = "utpada.api.v1") -> int:
    """
    自动注册路由

    Args:
        app: FastAPI应用实例
        package_name: 包含路由的包名

    Returns:
        int: 注册的路由模块数
    """
    try:
        package = importlib.import_module(package_name)
    except ImportError as e:
        logger.error(f"无法导入包 {package_name}: {e}")
        return 0

    routers_found = 0
    for _, module_name, is_pkg in pkgutil.iter_modules(package.__path__):
        full_module_name = f"{package_name}.{module_name}"
        if is_pkg:
            routers_found += auto_register_routers(app, full_module_name)
        else:
            routers_found += register_router_from_module(app, full_module_name)

    logger.info(f"自动注册了 {routers_found} 个路由模块")
    return routers_found


def register_router_from_module(app: FastAPI, module_name: str) -> int:
    """从模块注册路由（模块中名为 router 的 APIRouter）"""
    try:
        module = importlib.import_module(module_name)
    except ImportError as e:
        logger.warning(f"无法导入模块 {module_name}: {e}")
        return 0

    router = getattr(module, "router", None)
    if not isinstance(router, APIRouter):
        return 0
    prefix, tags = get_router_config(module_name)
    app.include_router(router, prefix=prefix, tags=tags)
    logger.info(f"注册路由: {module_name} -> {prefix} [{tags}]")
    return 1


def get_router_config(module_name: str) -> tuple[str, list[str]]:
    """
    根据模块名获取路由配置

    Returns:
        tuple: (prefix, tags)
    """
    module_base_name = module_name.split(".")[-1]
    if module_base_name == "health":
        return settings.API_PREFIX, ["health"]
    return f"{settings.API_PREFIX}/{module_base_name}", [module_base_name]
