"""
统一异常处理 - 将异常映射为进程退出码
"""
from functools import wraps
from typing import Callable

from pydantic import ValidationError

from app.exceptions import (
    BaseServiceException,
    EXIT_RUNTIME_FAILURE,
    EXIT_VALIDATION_ERROR,
)
from app.utils.logger import logger


def handle_command_errors(func: Callable[..., int]) -> Callable[..., int]:
    """
    子命令异常处理装饰器

    Args:
        func: 返回退出码的子命令函数

    Returns:
        包装后的函数，任何异常都被记录并转换为退出码
    """
    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except BaseServiceException as e:
            # 自定义异常
            logger.warning(f"业务异常 [{e.__class__.__name__}]: {e.detail}")
            return e.exit_code
        except ValidationError as e:
            logger.warning(f"配置校验失败: {e}")
            return EXIT_VALIDATION_ERROR
        except FileNotFoundError as e:
            logger.warning(f"文件不存在: {e.filename or e}")
            return EXIT_VALIDATION_ERROR
        except Exception as e:
            # 未预期的异常
            logger.opt(exception=e).error(f"未预期的异常: {str(e)}")
            return EXIT_RUNTIME_FAILURE
    return wrapper
