"""
缺失数据模型的 DIC₆

DIC₆ = −4·E_{θ,c}[log π(y,c|θ)] + 2·E_c[log π(y,c|θ̂) | y, θ̂]

第一个期望取联合链的记录样本；第二个期望取 θ 固定在后验均值 θ̂ 的增广链。
"""
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.types import Theta, WardData
from app.exceptions import InsufficientSamplesException
from app.mcmc.config import SamplerConfig
from app.mcmc.sampler import Sampler
from app.mcmc.samples import PosteriorSamples
from app.utils.logger import logger


# 条件链使用的派生键后缀，避免与联合链的随机流重合
CONDITIONAL_STREAM = 0xD1C


class DicSettings(BaseModel):
    """条件链的运行长度"""
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(default=50_000, gt=0)
    burn_in: int = Field(default=1_000, ge=0)
    thin: int = Field(default=1, gt=0)
    min_snapshots: int = Field(default=500, ge=1)

    @model_validator(mode="after")
    def _check_burn_in(self) -> "DicSettings":
        if self.burn_in >= self.iterations:
            raise ValueError(f"条件链 burn_in ({self.burn_in}) 必须小于 iterations ({self.iterations})")
        return self


class DicResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    dic6: float
    mean_loglik: float
    conditional_mean_loglik: float
    theta_hat: Theta
    n_draws: int
    n_conditional: int


def dic6_from_expectations(mean_loglik: float, conditional_mean_loglik: float) -> float:
    """−4·E[log π(y,c|θ)] + 2·E[log π(y,c|θ̂)]"""
    return -4.0 * mean_loglik + 2.0 * conditional_mean_loglik


def conditional_loglik_draws(
    ward: WardData,
    theta_hat: Theta,
    chain_config: SamplerConfig,
    settings: DicSettings,
    samples: Optional[PosteriorSamples] = None,
) -> np.ndarray:
    """
    θ 固定为 θ̂ 时增广链的 log π(y,c|θ̂) 序列

    从联合链最后一个快照出发；快照不可用时从初始增广出发。
    """
    config = chain_config.model_copy(update={
        "iterations": settings.iterations,
        "burn_in": settings.burn_in,
        "thin": settings.thin,
        "spawn_key": tuple(chain_config.spawn_key) + (CONDITIONAL_STREAM,),
        "progress_every": 0,
    })
    start = samples.snapshot(samples.n_snapshots - 1) if samples is not None and samples.n_snapshots else None
    sampler = Sampler(ward, config, theta=theta_hat, augmentation=start, update_theta=False)
    values = []
    while sampler.iteration < config.iterations:
        sampler.step()
        i = sampler.iteration
        if i > config.burn_in and (i - config.burn_in) % config.thin == 0:
            values.append(sampler.state.loglik)
    return np.asarray(values, dtype=float)


def dic6(
    samples: PosteriorSamples,
    ward: WardData,
    chain_config: SamplerConfig,
    settings: Optional[DicSettings] = None,
) -> DicResult:
    """
    计算 DIC₆

    Args:
        samples: 联合链的后验样本（需带增广快照）
        ward: 拟合所用的病房数据
        chain_config: 联合链的采样器配置（先验、步长、种子沿用）
        settings: 条件链长度与快照数下限

    Returns:
        DIC₆ 及其两个期望

    Raises:
        InsufficientSamplesException: 快照数少于下限
    """
    settings = settings or DicSettings()
    if samples.n_snapshots < settings.min_snapshots:
        raise InsufficientSamplesException(
            f"{samples.ward_id}/{samples.model_kind.value}: 只有 {samples.n_snapshots} 个增广快照，"
            f"DIC₆ 至少需要 {settings.min_snapshots} 个；请增大 iterations 或减小 sampler.snapshot_stride"
        )
    theta_hat = samples.posterior_mean_theta()
    mean_loglik = float(np.mean(samples.column("loglik")))
    conditional = conditional_loglik_draws(ward, theta_hat, chain_config, settings, samples)
    conditional_mean = float(np.mean(conditional))
    value = dic6_from_expectations(mean_loglik, conditional_mean)
    logger.info(f"{samples.ward_id}/{samples.model_kind.value}: DIC₆ = {value:.2f}")
    return DicResult(
        dic6=value,
        mean_loglik=mean_loglik,
        conditional_mean_loglik=conditional_mean,
        theta_hat=theta_hat,
        n_draws=samples.n_draws,
        n_conditional=int(conditional.size),
    )
