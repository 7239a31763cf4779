"""
后验预测检验：预测 p 值与检出定植的预测轨迹

每次模拟从后验样本中按固定步长取一个 θ，在观测到的入出院框架上前向模拟，
统计每个区间内首次检出定植的病人数。
"""
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.core.types import WardData
from app.exceptions import InsufficientSamplesException, ValidationException
from app.mcmc.samples import PosteriorSamples
from app.simulate.engine import (
    AdmissionFrame,
    detected_colonizations_by_interval,
    detected_counts,
    simulate_outcome,
)
from app.simulate.policy import SimPolicy


MIN_PPP_REPLICATES = 100
# 每 100 次迭代取一个 θ
THETA_ITERATION_STRIDE = 100


class PredictiveSimulations(BaseModel):
    """预测模拟结果：每行一次模拟，每列一个区间"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    interval_days: float
    observed: np.ndarray
    simulated: np.ndarray
    draw_indices: np.ndarray

    @property
    def n_sims(self) -> int:
        return int(self.simulated.shape[0])

    @property
    def observed_total(self) -> int:
        return int(self.observed.sum())

    @property
    def simulated_totals(self) -> np.ndarray:
        return self.simulated.sum(axis=1)


class PredictiveCheck(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pvalue: float
    observed_total: int
    simulated_totals: np.ndarray


def predictive_draw_indices(n_draws: int, n_sims: int, thin: int) -> np.ndarray:
    """
    用于模拟的样本下标

    每 max(1, 100 // thin) 个记录样本取一个；需要的模拟次数更多时循环使用。
    """
    if n_draws <= 0:
        raise InsufficientSamplesException("后验样本为空，无法做预测模拟")
    stride = max(1, THETA_ITERATION_STRIDE // thin)
    candidates = np.arange(0, n_draws, stride)
    return candidates[np.arange(n_sims) % candidates.size]


def _stream(seed: int, spawn_key: Tuple[int, ...], n: int):
    return np.random.SeedSequence(seed, spawn_key=tuple(spawn_key)).spawn(n)


def predictive_simulations(
    samples: PosteriorSamples,
    ward: WardData,
    n_sims: int,
    policy: Optional[SimPolicy] = None,
    interval_days: float = 14.0,
    thin: int = 1,
    seed: int = 0,
    spawn_key: Tuple[int, ...] = (),
) -> PredictiveSimulations:
    """
    在观测入出院框架上做 n_sims 次前向模拟

    Args:
        samples: 后验样本
        ward: 观测病房数据
        n_sims: 模拟次数
        policy: 检测与隔离策略（默认沿用观测检测时间）
        interval_days: 分箱区间长度（天）
        thin: 拟合时的稀疏间隔，用于换算 θ 步长
        seed: 随机种子
        spawn_key: 派生键；每次模拟使用其下一个独立子流

    Returns:
        观测与模拟的分箱检出数
    """
    if n_sims < 1:
        raise ValidationException(f"模拟次数必须为正: {n_sims}")
    policy = policy or SimPolicy()
    observed = detected_colonizations_by_interval(ward, interval_days)
    frame = AdmissionFrame.from_ward(ward)
    indices = predictive_draw_indices(samples.n_draws, n_sims, thin)
    simulated = np.zeros((n_sims, observed.size), dtype=np.int64)
    for k, child in enumerate(_stream(seed, spawn_key, n_sims)):
        outcome = simulate_outcome(frame, samples.theta_at(int(indices[k])), policy, np.random.default_rng(child))
        simulated[k] = detected_counts(outcome.first_positive_times(), outcome.readmission, ward.T_E, interval_days)
    return PredictiveSimulations(
        interval_days=interval_days,
        observed=observed,
        simulated=simulated,
        draw_indices=indices,
    )


def pvalue_from_simulations(simulations: PredictiveSimulations) -> PredictiveCheck:
    totals = simulations.simulated_totals
    observed = simulations.observed_total
    return PredictiveCheck(
        pvalue=float(np.mean(totals >= observed)),
        observed_total=observed,
        simulated_totals=totals,
    )


def posterior_predictive_pvalue(
    samples: PosteriorSamples,
    ward: WardData,
    replicates: int = 1000,
    policy: Optional[SimPolicy] = None,
    thin: int = 1,
    seed: int = 0,
    spawn_key: Tuple[int, ...] = (),
) -> PredictiveCheck:
    """
    以检出定植总数为差异统计量的后验预测 p 值

    p = 模拟总数 ≥ 观测总数的模拟所占比例。

    Raises:
        ValidationException: replicates 少于 100
    """
    if replicates < MIN_PPP_REPLICATES:
        raise ValidationException(f"预测 p 值至少需要 {MIN_PPP_REPLICATES} 次模拟，当前为 {replicates}")
    simulations = predictive_simulations(
        samples, ward, replicates, policy, ward.T_E, thin, seed, spawn_key,
    )
    return pvalue_from_simulations(simulations)


def trajectory_bands(simulations: PredictiveSimulations) -> pd.DataFrame:
    """每个区间的观测值、模拟均值与 2.5%/97.5% 分位数"""
    simulated = simulations.simulated.astype(float)
    lower, upper = np.percentile(simulated, [2.5, 97.5], axis=0)
    starts = np.arange(simulations.observed.size) * simulations.interval_days
    return pd.DataFrame({
        "interval_start": starts,
        "interval_end": starts + simulations.interval_days,
        "observed": simulations.observed,
        "mean": simulated.mean(axis=0),
        "lower": lower,
        "upper": upper,
    })


def predictive_trajectories(
    samples: PosteriorSamples,
    ward: WardData,
    interval_days: float = 14.0,
    n_sims: int = 2000,
    policy: Optional[SimPolicy] = None,
    thin: int = 1,
    seed: int = 0,
    spawn_key: Tuple[int, ...] = (),
) -> pd.DataFrame:
    """检出定植数的预测区间带，与观测序列并列"""
    simulations = predictive_simulations(
        samples, ward, n_sims, policy, interval_days, thin, seed, spawn_key,
    )
    return trajectory_bands(simulations)
