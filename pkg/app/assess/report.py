"""
单个 (病房, 模型) 的评估汇总
"""
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.assess.carriage import carriage_posterior, carriage_summary, monthly_prevalence, prevalence_overview
from app.assess.dic import DicResult, DicSettings, dic6
from app.assess.efficacy import EfficacySummary, efficacy_summary
from app.assess.predictive import (
    MIN_PPP_REPLICATES,
    PredictiveSimulations,
    predictive_simulations,
    pvalue_from_simulations,
    trajectory_bands,
)
from app.assess.summary import posterior_summary, ward_exploration
from app.core.types import WardData
from app.exceptions import InsufficientSamplesException
from app.mcmc.config import SamplerConfig
from app.mcmc.samples import PosteriorSamples
from app.simulate.policy import SimPolicy
from app.utils.logger import logger


# 预测模拟使用的派生键后缀
PREDICTIVE_STREAM = 0x99C


class AssessSettings(BaseModel):
    """评估参数（运行配置文件的 [assess] 段）"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dic_iterations: int = Field(default=50_000, gt=0)
    dic_burn_in: int = Field(default=1_000, ge=0)
    min_snapshots: int = Field(default=500, ge=1)
    ppp_replicates: int = Field(default=1000, ge=MIN_PPP_REPLICATES)
    n_sims: int = Field(default=2000, gt=0)
    interval_days: float = Field(default=14.0, gt=0)
    exploration_days: float = Field(default=7.0, gt=0)
    prevalence_block_days: int = Field(default=30, gt=0)
    skip_dic: bool = False

    @property
    def dic(self) -> DicSettings:
        return DicSettings(
            iterations=self.dic_iterations,
            burn_in=self.dic_burn_in,
            min_snapshots=self.min_snapshots,
        )


class AssessmentReport(BaseModel):
    """一个 (病房, 模型) 的评估结果"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    ward_id: str
    model: str
    n_draws: int
    n_snapshots: int
    dic: Optional[DicResult] = None
    ppp: float
    observed_detected: int
    carriage: Dict[str, Any]
    efficacy: EfficacySummary
    prevalence: Dict[str, float]
    acceptance: Dict[str, float]

    # 按图表输出的明细表，不进入 JSON
    trajectory: pd.DataFrame = Field(exclude=True)
    ppp_totals: pd.DataFrame = Field(exclude=True)
    carriage_draws: pd.DataFrame = Field(exclude=True)
    monthly: pd.DataFrame = Field(exclude=True)
    summary: pd.DataFrame = Field(exclude=True)
    exploration: pd.DataFrame = Field(exclude=True)

    @property
    def dic6(self) -> Optional[float]:
        return None if self.dic is None else self.dic.dic6


def _check_snapshots(samples: PosteriorSamples) -> None:
    if samples.n_snapshots == 0:
        raise InsufficientSamplesException(
            f"{samples.ward_id}/{samples.model_kind.value}: 后验样本不含增广快照；"
            f"请在 [sampler] 中设置 snapshot_stride（例如 10）后重新运行 fit"
        )


def assess_posterior(
    samples: PosteriorSamples,
    ward: WardData,
    chain_config: SamplerConfig,
    settings: Optional[AssessSettings] = None,
    policy: Optional[SimPolicy] = None,
) -> AssessmentReport:
    """
    对一条链的后验样本做全部评估

    预测 p 值与预测轨迹共用同一批模拟：前 ppp_replicates 次用于 p 值，
    前 n_sims 次用于轨迹。

    Args:
        samples: 后验样本
        ward: 拟合所用的病房数据
        chain_config: 拟合时的采样器配置（种子、稀疏间隔、先验）
        settings: 评估参数
        policy: 预测模拟的检测与隔离策略

    Raises:
        InsufficientSamplesException: 缺少增广快照
    """
    settings = settings or AssessSettings()
    _check_snapshots(samples)
    label = f"{samples.ward_id}/{samples.model_kind.value}"

    dic = None if settings.skip_dic else dic6(samples, ward, chain_config, settings.dic)

    n_total = max(settings.ppp_replicates, settings.n_sims)
    spawn_key: Tuple[int, ...] = tuple(chain_config.spawn_key) + (PREDICTIVE_STREAM,)
    simulations = predictive_simulations(
        samples, ward, n_total, policy, settings.interval_days,
        chain_config.thin, chain_config.seed, spawn_key,
    )
    check = pvalue_from_simulations(_head(simulations, settings.ppp_replicates))
    trajectory = trajectory_bands(_head(simulations, settings.n_sims))
    logger.info(f"{label}: 预测 p 值 = {check.pvalue:.3f}（观测检出 {check.observed_total}）")

    carriage_draws = carriage_posterior(samples, ward)
    monthly = monthly_prevalence(ward, samples.snapshots, settings.prevalence_block_days)

    return AssessmentReport(
        ward_id=samples.ward_id,
        model=samples.model_kind.value,
        n_draws=samples.n_draws,
        n_snapshots=samples.n_snapshots,
        dic=dic,
        ppp=check.pvalue,
        observed_detected=check.observed_total,
        carriage=carriage_summary(carriage_draws),
        efficacy=efficacy_summary(samples),
        prevalence=prevalence_overview(monthly),
        acceptance=samples.acceptance_rates(),
        trajectory=trajectory,
        ppp_totals=pd.DataFrame({
            "replicate": np.arange(check.simulated_totals.size),
            "simulated": check.simulated_totals,
            "observed": check.observed_total,
        }),
        carriage_draws=carriage_draws,
        monthly=monthly,
        summary=posterior_summary(samples),
        exploration=ward_exploration(ward, settings.exploration_days),
    )


def _head(simulations: PredictiveSimulations, n: int) -> PredictiveSimulations:
    return simulations.model_copy(update={
        "simulated": simulations.simulated[:n],
        "draw_indices": simulations.draw_indices[:n],
    })
