"""
(病房, 模型) 作业的进程池

每个作业独立且确定；异常在工作进程内转换为带退出码的结果，
一个作业失败不影响其他作业。
"""
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError

from app.exceptions import (
    EXIT_OK,
    EXIT_RUNTIME_FAILURE,
    EXIT_VALIDATION_ERROR,
    BaseServiceException,
)
from app.utils.logger import logger
from app.utils.timing import log_stage


class JobOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    exit_code: int = EXIT_OK
    error: Optional[str] = None
    result: Any = None

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def _run_one(name: str, func: Callable[..., Any], args: Tuple[Any, ...]) -> JobOutcome:
    try:
        with log_stage(name):
            return JobOutcome(name=name, result=func(*args))
    except BaseServiceException as e:
        return JobOutcome(name=name, exit_code=e.exit_code, error=e.detail)
    except ValidationError as e:
        return JobOutcome(name=name, exit_code=EXIT_VALIDATION_ERROR, error=str(e))
    except Exception as e:
        logger.opt(exception=e).error(f"作业 {name} 出现未预期的异常")
        return JobOutcome(name=name, exit_code=EXIT_RUNTIME_FAILURE, error=f"{e.__class__.__name__}: {e}")


def run_jobs(
    func: Callable[..., Any],
    jobs: Sequence[Tuple[str, Tuple[Any, ...]]],
    workers: int = 1,
) -> List[JobOutcome]:
    """
    运行一批作业

    Args:
        func: 模块级函数（需可被 pickle）
        jobs: (作业名, 参数元组) 列表
        workers: 进程数；1 表示在当前进程内顺序执行

    Returns:
        与 jobs 顺序一致的结果
    """
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(name, func, args) for name, args in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [pool.submit(_run_one, name, func, args) for name, args in jobs]
        return [future.result() for future in futures]


def summarize_outcomes(outcomes: Sequence[JobOutcome], what: str) -> int:
    """记录失败的作业并返回总退出码（取最严重的一个）"""
    failed = [outcome for outcome in outcomes if not outcome.ok]
    for outcome in failed:
        logger.warning(f"{what}失败 [{outcome.name}]: {outcome.error}")
    logger.info(f"{what}完成: 成功 {len(outcomes) - len(failed)}/{len(outcomes)}")
    return max((outcome.exit_code for outcome in failed), default=EXIT_OK)
