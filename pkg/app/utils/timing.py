"""
阶段耗时日志
"""
import time
from contextlib import contextmanager
from typing import Iterator

from app.utils.logger import logger


@contextmanager
def log_stage(name: str) -> Iterator[None]:
    """
    记录一个处理阶段的开始、完成与失败

    Args:
        name: 阶段名称（如 "fit M1/full"）
    """
    start_time = time.time()
    logger.info(f"阶段开始: {name}")
    try:
        yield
    except Exception as e:
        process_time = time.time() - start_time
        logger.error(
            f"阶段失败: {name} - "
            f"错误: {str(e)} - "
            f"耗时: {process_time:.3f}s"
        )
        raise
    process_time = time.time() - start_time
    logger.info(f"阶段完成: {name} - 耗时: {process_time:.3f}s")
