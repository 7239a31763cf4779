"""
隔离效果：log(β₁/β₂) 的后验摘要与跨病房的固定效应逆方差合并
"""
import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from app.exceptions import ValidationException
from app.mcmc.samples import PosteriorSamples
from app.utils.logger import logger


MIN_EFFICACY_DRAWS = 1000


class EfficacySummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    ward_id: str
    prob_beta1_greater: float
    log_ratio_median: float
    log_ratio_lower: float
    log_ratio_upper: float
    log_ratio_mean: float
    log_ratio_variance: float
    ratio_median: float
    n_draws: int


class PooledEfficacy(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_ratio: float
    variance: float
    lower: float
    upper: float
    ratio: float
    ratio_lower: float
    ratio_upper: float
    n_wards: int


def efficacy_summary(samples: PosteriorSamples) -> EfficacySummary:
    """
    P(β₁ > β₂ | y) 与 log(β₁/β₂) 的后验中位数、95% 可信区间和方差

    β 为 0 的样本得到无穷的对数比，只计入概率，不计入分位数与方差。
    """
    beta1 = samples.column("beta1")
    beta2 = samples.column("beta2")
    if samples.n_draws < MIN_EFFICACY_DRAWS:
        logger.warning(f"{samples.ward_id}/{samples.model_kind.value}: 只有 {samples.n_draws} 个样本，效果估计不稳定")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.log(beta1) - np.log(beta2)
    finite = log_ratio[np.isfinite(log_ratio)]
    if finite.size:
        lower, median, upper = np.quantile(finite, [0.025, 0.5, 0.975])
        mean = float(finite.mean())
        variance = float(finite.var(ddof=1)) if finite.size > 1 else 0.0
    else:
        lower = median = upper = mean = variance = math.nan
    return EfficacySummary(
        ward_id=samples.ward_id,
        prob_beta1_greater=float(np.mean(beta1 > beta2)) if samples.n_draws else math.nan,
        log_ratio_median=float(median),
        log_ratio_lower=float(lower),
        log_ratio_upper=float(upper),
        log_ratio_mean=mean,
        log_ratio_variance=variance,
        ratio_median=float(math.exp(median)) if math.isfinite(median) else math.nan,
        n_draws=samples.n_draws,
    )


def pool_efficacy(estimates: Sequence[float], variances: Sequence[float], level: float = 0.95) -> PooledEfficacy:
    """
    固定效应逆方差合并

    权重 wᵢ = 1/varᵢ，合并估计 Σwᵢxᵢ/Σwᵢ，合并方差 1/Σwᵢ。

    Args:
        estimates: 各病房 log(β₁/β₂) 的点估计
        variances: 对应的方差
        level: 置信水平

    Raises:
        ValidationException: 输入为空、长度不一致、方差非正或非有限
    """
    x = np.asarray(estimates, dtype=float)
    v = np.asarray(variances, dtype=float)
    if x.size == 0 or x.shape != v.shape:
        raise ValidationException(f"合并需要等长的非空估计与方差: {x.size} vs {v.size}")
    if not np.all(np.isfinite(x)):
        raise ValidationException(f"估计值必须有限: {x.tolist()}")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise ValidationException(f"方差必须为有限正数: {v.tolist()}")

    weights = 1.0 / v
    pooled = float(x[0]) if x.size == 1 else float(np.sum(weights * x) / np.sum(weights))
    variance = float(v[0]) if x.size == 1 else float(1.0 / np.sum(weights))
    z = float(stats.norm.ppf(0.5 + level / 2))
    half = z * math.sqrt(variance)
    return PooledEfficacy(
        log_ratio=pooled,
        variance=variance,
        lower=pooled - half,
        upper=pooled + half,
        ratio=math.exp(pooled),
        ratio_lower=math.exp(pooled - half),
        ratio_upper=math.exp(pooled + half),
        n_wards=int(x.size),
    )
