"""
MCMC 采样器

每次迭代：Gibbs 更新 p、φ，逐个随机游走更新 β，
然后做 moves_per_iteration 次定植时间更新（每次在添加、删除、移动中均匀选择一种）。
"""
import math
from typing import List, Optional

import numpy as np
import pandas as pd

from app.core.likelihood import log_augmented_likelihood
from app.core.types import Augmentation, Theta, WardData
from app.exceptions import SamplerException
from app.mcmc.config import SamplerConfig
from app.mcmc.moves import (
    COLONIZATION_MOVES,
    gibbs_update_p,
    gibbs_update_phi,
    rw_update_betas,
)
from app.mcmc.samples import SAMPLE_COLUMNS, PosteriorSamples
from app.mcmc.state import ChainState
from app.utils.logger import logger


# 初始 β ~ Exp(100)，即均值 0.01/天
INITIAL_BETA_RATE = 100.0


def make_rng(seed: int, spawn_key=()) -> np.random.Generator:
    """由种子与派生键构造独立的随机流"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(spawn_key)))


def initial_theta(config: SamplerConfig, rng: np.random.Generator) -> Theta:
    """p、φ 取自先验；β 取自 Exp(100)"""
    prior = config.prior
    betas = rng.exponential(1.0 / INITIAL_BETA_RATE, size=3)
    return Theta(
        p=float(rng.beta(prior.p_alpha, prior.p_beta)),
        phi=float(rng.beta(prior.phi_alpha, prior.phi_beta)),
        beta0=float(betas[0]),
        beta1=float(betas[1]),
        beta2=float(betas[2]),
        model_kind=config.model_kind,
    )


class Sampler:
    """
    单条链

    Args:
        ward: 病房数据（只读共享）
        config: 采样器配置
        theta: 初始参数（默认按 initial_theta 抽取）
        augmentation: 初始增广（默认 Augmentation.initial）
        update_theta: False 时 θ 固定不动，只更新增广
        rng: 随机流（默认由 config.seed 与 config.spawn_key 构造）
    """

    def __init__(
        self,
        ward: WardData,
        config: SamplerConfig,
        theta: Optional[Theta] = None,
        augmentation: Optional[Augmentation] = None,
        update_theta: bool = True,
        rng: Optional[np.random.Generator] = None,
    ):
        self.config = config
        self.update_theta = update_theta
        self.rng = rng if rng is not None else make_rng(config.seed, config.spawn_key)
        if theta is None:
            theta = initial_theta(config, self.rng)
        elif theta.model_kind != config.model_kind:
            theta = theta.model_copy(update={"model_kind": config.model_kind})
        if augmentation is None:
            augmentation = Augmentation.initial(ward)
        self.state = ChainState(ward, theta, augmentation, config.prior, config.phi0, self.rng)
        self.iteration = 0
        if self.state.loglik == -math.inf:
            raise SamplerException(f"病房 {ward.ward_id} 的初始状态似然为 −∞")

    @property
    def ward(self) -> WardData:
        return self.state.ward

    def step(self) -> None:
        """执行一次完整迭代"""
        state = self.state
        if self.update_theta:
            gibbs_update_p(state)
            gibbs_update_phi(state)
            rw_update_betas(state, self.config.rw_sd)
        for _ in range(self.config.moves_per_iteration):
            move = COLONIZATION_MOVES[int(self.rng.integers(len(COLONIZATION_MOVES)))]
            move(state)
        self.iteration += 1

        if self.config.debug_checks:
            state.augmentation.validate_against(state.ward)
        if self.iteration % self.config.check_every == 0:
            self.check_consistency()

    def check_consistency(self) -> None:
        """
        用完整重算核对缓存的对数似然

        Raises:
            SamplerException: 相对误差超过 1e-7
        """
        cached = self.state.loglik
        reference = log_augmented_likelihood(self.state.ward, self.state.augmentation, self.state.theta)
        if cached == reference:
            return
        if not math.isclose(cached, reference, rel_tol=1e-7, abs_tol=1e-9):
            raise SamplerException(
                f"第 {self.iteration} 次迭代：缓存似然 {cached!r} 与完整重算 {reference!r} 不一致"
            )

    def record(self) -> list:
        state = self.state
        return [
            self.iteration, state.p, state.phi,
            float(state.betas[0]), float(state.betas[1]), float(state.betas[2]),
            state.loglik, len(state.n1), state.n_CA, state.n_FN, state.colonized_days,
        ]

    def run(self) -> PosteriorSamples:
        """
        运行整条链并收集记录样本

        Returns:
            后验样本
        """
        config = self.config
        ward_id = self.state.ward.ward_id
        rows: List[list] = []
        snapshot_iterations: List[int] = []
        snapshots: List[np.ndarray] = []

        while self.iteration < config.iterations:
            self.step()
            i = self.iteration
            if i > config.burn_in and (i - config.burn_in) % config.thin == 0:
                rows.append(self.record())
                if config.snapshot_stride and len(rows) % config.snapshot_stride == 0:
                    snapshot_iterations.append(i)
                    snapshots.append(self.state.c.copy())
            if config.progress_every and i % config.progress_every == 0:
                rates = self.state.counter.rates()
                logger.info(
                    f"[{ward_id}/{config.model_kind.value}] 迭代 {i}/{config.iterations} - "
                    f"loglik: {self.state.loglik:.3f} - "
                    f"接受率 β: {rates['beta0']:.2f}/{rates['beta1']:.2f}/{rates['beta2']:.2f} "
                    f"添加: {rates['add']:.2f} 删除: {rates['delete']:.2f} 移动: {rates['shift']:.2f}"
                )

        n_episodes = self.state.ward.n_episodes
        return PosteriorSamples(
            ward_id=ward_id,
            model_kind=config.model_kind,
            draws=pd.DataFrame(rows, columns=SAMPLE_COLUMNS),
            acceptance=self.state.counter.to_dict(),
            snapshot_iterations=np.asarray(snapshot_iterations, dtype=np.int64),
            snapshots=np.asarray(snapshots, dtype=float).reshape(len(snapshots), n_episodes),
            seed=config.seed,
            spawn_key=list(config.spawn_key),
            config=config.model_dump(mode="json"),
        )


def run_chain(ward: WardData, config: SamplerConfig) -> PosteriorSamples:
    """
    运行一条 MCMC 链

    Args:
        ward: 病房数据
        config: 采样器配置

    Returns:
        后验样本；相同的种子给出逐位相同的结果
    """
    return Sampler(ward, config).run()
