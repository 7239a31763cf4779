"""
增广似然 log π(y, c | θ)、先验与对数后验

所有计算在对数空间进行。常数因子（组合项）取 1，
因此不同模型间的 DIC 只在同一约定下可比。
"""
import math
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import stats
from scipy.special import xlog1py, xlogy

from app.core.timeline import (
    COLONIZATION,
    WardTimeline,
    build_timeline,
    counts_just_before,
    hazard_exposures,
    integrate_hazard,
    on_ward_design,
)
from app.core.types import (
    Augmentation,
    CountsSummary,
    ModelKind,
    Theta,
    WardArrays,
    WardData,
    compile_ward,
)
from app.transmission.base import BaseTransmissionModel
from app.utils.model_factory import get_model


class PriorConfig(BaseModel):
    """
    先验配置

    p ~ Beta(p_alpha, p_beta)，φ ~ Beta(phi_alpha, phi_beta)，
    β_k ~ Exp(beta_rates[k])（密度 r·e^{−r x}，均值 1/r）。
    """
    model_config = ConfigDict(frozen=True)

    p_alpha: float = Field(default=1.0, gt=0)
    p_beta: float = Field(default=1.0, gt=0)
    phi_alpha: float = Field(default=1.0, gt=0)
    phi_beta: float = Field(default=1.0, gt=0)
    beta_rates: Tuple[float, float, float] = (1e-6, 1e-6, 1e-6)

    @field_validator("beta_rates")
    @classmethod
    def _rates_positive(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not (r > 0) or not math.isfinite(r) for r in value):
            raise ValueError(f"β 的先验速率必须为正的有限数: {value}")
        return value

    @classmethod
    def for_model(
        cls,
        kind: Union[ModelKind, str, None] = None,
        beta_rate: Optional[float] = None,
        **overrides,
    ) -> "PriorConfig":
        """
        模型种类的默认先验

        Args:
            kind: 模型种类
            beta_rate: 统一替换 β₁、β₂（以及非无背景模型的 β₀）的先验速率，用于先验敏感性分析
            **overrides: 其余字段的覆盖值

        Returns:
            先验配置
        """
        model = get_model(kind)
        rates = list(model.default_beta_rates)
        if beta_rate is not None:
            for k in range(3):
                # 无背景模型的 β₀ 先验是模型定义的一部分，不随敏感性分析改变
                if k == 0 and model.kind == ModelKind.NO_BACKGROUND:
                    continue
                rates[k] = float(beta_rate)
        values = {"beta_rates": tuple(rates)}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def rates(self) -> np.ndarray:
        return np.asarray(self.beta_rates, dtype=float)


def colonization_rate(theta: Theta, C: int, Q: int) -> float:
    """
    单个易感者的定植率

    Args:
        theta: 模型参数
        C: 已定植且未隔离的人数
        Q: 已定植且隔离的人数

    Returns:
        每天的定植率
    """
    return float(get_model(theta.model_kind).rate(theta, C, Q))


def _false_negative_total(arrays: WardArrays, c: np.ndarray) -> int:
    colonized = np.flatnonzero(np.isfinite(c))
    return sum(arrays.false_negatives(int(j), float(c[j])) for j in colonized)


def counts_summary(ward: WardData, augmentation: Augmentation) -> CountsSummary:
    """
    计算 (n_A, n_CA, n_TP, n_FN)

    定植时间之前的阴性检测是真阴性，不计入 n_FN；
    再入院定植住院段（c = a）在 a 之后的阴性检测计入 n_FN。
    """
    arrays = compile_ward(ward)
    c = augmentation.colonization_times
    new_admission = ~arrays.readmission
    return CountsSummary(
        n_A=arrays.n_new_admissions,
        n_CA=int(np.count_nonzero(new_admission & (c == arrays.a))),
        n_TP=arrays.n_true_positive,
        n_FN=_false_negative_total(arrays, c),
    )


def log_count_terms(counts: CountsSummary, p: float, phi: float) -> float:
    """φ 与 p 的四个计数项；0·log 0 取 0"""
    value = (
        xlogy(counts.n_CA, phi)
        + xlog1py(counts.n_A - counts.n_CA, -phi)
        + xlogy(counts.n_TP, p)
        + xlog1py(counts.n_FN, -p)
    )
    return float(value)


def log_augmented_likelihood(ward: WardData, augmentation: Augmentation, theta: Theta) -> float:
    """
    增广对数似然

    n_CA·log φ + (n_A−n_CA)·log(1−φ) + n_TP·log p + n_FN·log(1−p)
    + Σ_{j∈𝒦} log λ(c_j−) − ∫ S(t)λ(t) dt

    Args:
        ward: 病房数据
        augmentation: 满足不变量的增广
        theta: 模型参数

    Returns:
        对数似然；任一 λ(c_j−) = 0 或边界参数与计数冲突时为 −∞
    """
    value = log_count_terms(counts_summary(ward, augmentation), theta.p, theta.phi)
    if value == -math.inf:
        return -math.inf

    timeline = build_timeline(ward, augmentation)
    c = augmentation.colonization_times
    for j in timeline.on_ward_episodes:
        _, C, Q = counts_just_before(timeline, float(c[j]), COLONIZATION, int(j))
        rate = colonization_rate(theta, C, Q)
        if rate <= 0:
            return -math.inf
        value += math.log(rate)
    return value - integrate_hazard(timeline, theta)


def log_prior(theta: Theta, prior: PriorConfig) -> float:
    """各分量先验对数密度之和；支撑集外为 −∞"""
    betas = theta.betas
    if np.any(betas < 0) or not (0 <= theta.p <= 1) or not (0 <= theta.phi <= 1):
        return -math.inf
    value = stats.beta.logpdf(theta.p, prior.p_alpha, prior.p_beta)
    value += stats.beta.logpdf(theta.phi, prior.phi_alpha, prior.phi_beta)
    value += np.sum(stats.expon.logpdf(betas, scale=1.0 / prior.rates))
    return float(value)


def log_posterior(
    ward: WardData,
    augmentation: Augmentation,
    theta: Theta,
    prior: PriorConfig,
) -> float:
    """未归一化的对数后验 log π(y, c | θ) + log π(θ)"""
    lp = log_prior(theta, prior)
    if lp == -math.inf:
        return -math.inf
    return lp + log_augmented_likelihood(ward, augmentation, theta)


class TransmissionStatistics(BaseModel):
    """
    传播部分的充分统计量

    传播项 = Σ log(design · β) − exposures · β，对 β 的每次更新只需一次点积。
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    exposures: np.ndarray
    design: np.ndarray

    def log_term(self, betas: np.ndarray) -> float:
        value = -float(self.exposures @ betas)
        if self.design.shape[0]:
            rates = self.design @ betas
            if np.any(rates <= 0):
                return -math.inf
            value += float(np.sum(np.log(rates)))
        return value


def transmission_statistics(
    timeline: WardTimeline,
    model: BaseTransmissionModel,
) -> TransmissionStatistics:
    """由时间线计算暴露量与 𝒦 的设计矩阵"""
    return TransmissionStatistics(
        exposures=hazard_exposures(timeline, model),
        design=on_ward_design(timeline, model),
    )
