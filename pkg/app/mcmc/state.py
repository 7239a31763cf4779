"""
链状态：当前 (θ, c)、𝒩₀/𝒩₁ 索引集合与缓存的似然分量
"""
import math
from typing import Dict, Optional

import numpy as np

from app.core.likelihood import (
    PriorConfig,
    TransmissionStatistics,
    log_count_terms,
    transmission_statistics,
)
from app.core.timeline import timeline_from_arrays
from app.core.types import (
    Augmentation,
    CountsSummary,
    Theta,
    WardArrays,
    WardData,
    compile_ward,
)
from app.exceptions import SamplerException
from app.transmission.base import BaseTransmissionModel
from app.utils.index_set import IndexSet
from app.utils.model_factory import get_model


MOVE_NAMES = ("beta0", "beta1", "beta2", "add", "delete", "shift")


class MoveCounter:
    """各类更新的提议数与接受数"""

    def __init__(self):
        self.proposed: Dict[str, int] = {name: 0 for name in MOVE_NAMES}
        self.accepted: Dict[str, int] = {name: 0 for name in MOVE_NAMES}

    def record(self, name: str, accepted: bool) -> None:
        self.proposed[name] += 1
        if accepted:
            self.accepted[name] += 1

    def rates(self) -> Dict[str, float]:
        return {
            name: (self.accepted[name] / self.proposed[name]) if self.proposed[name] else 0.0
            for name in MOVE_NAMES
        }

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        rates = self.rates()
        return {
            name: {
                "proposed": self.proposed[name],
                "accepted": self.accepted[name],
                "rate": rates[name],
            }
            for name in MOVE_NAMES
        }


class Proposal:
    """单个住院段定植时间的候选值及其对应的似然分量"""

    __slots__ = ("episode", "new_c", "n_CA", "n_FN", "statistics", "transmission")

    def __init__(self, episode: int, new_c: float, n_CA: int, n_FN: int,
                 statistics: TransmissionStatistics, transmission: float):
        self.episode = episode
        self.new_c = new_c
        self.n_CA = n_CA
        self.n_FN = n_FN
        self.statistics = statistics
        self.transmission = transmission


class ChainState:
    """
    单条链的可变状态

    loglik = 计数项(p, φ) + 传播项(β)，两部分分别缓存；
    改变定植时间时重建时间线，改变 β 时只做点积。
    """

    def __init__(
        self,
        ward: WardData,
        theta: Theta,
        augmentation: Augmentation,
        prior: PriorConfig,
        phi0: float,
        rng: np.random.Generator,
    ):
        self.prior = prior
        self.phi0 = phi0
        self.rng = rng
        self.model: BaseTransmissionModel = get_model(theta.model_kind)
        self.model_kind = theta.model_kind
        self.p = float(theta.p)
        self.phi = float(theta.phi)
        self.betas = theta.betas.copy()
        self.c = augmentation.colonization_times.astype(float).copy()
        self.counter = MoveCounter()
        self.set_data(ward)

    def set_data(self, ward: WardData) -> None:
        """替换观测数据（保留当前 θ 与 c），重新派生集合与缓存"""
        self.ward = ward
        self.arrays: WardArrays = compile_ward(ward)
        Augmentation(colonization_times=self.c).validate_against(ward)
        negative = self.arrays.negative_idx
        colonized = np.isfinite(self.c[negative])
        self.n1 = IndexSet(negative[colonized])
        self.n0 = IndexSet(negative[~colonized])
        self.refresh()

    def refresh(self) -> None:
        """从当前 c 完整重算计数与传播统计量"""
        arrays = self.arrays
        c = self.c
        self.n_A = arrays.n_new_admissions
        self.n_TP = arrays.n_true_positive
        self.n_CA = int(np.count_nonzero(~arrays.readmission & (c == arrays.a)))
        self.n_FN = sum(
            arrays.false_negatives(int(j), float(c[j])) for j in np.flatnonzero(np.isfinite(c))
        )
        self.statistics = transmission_statistics(timeline_from_arrays(arrays, c), self.model)
        self.transmission = self.statistics.log_term(self.betas)

    @property
    def theta(self) -> Theta:
        return Theta(
            p=self.p,
            phi=self.phi,
            beta0=float(self.betas[0]),
            beta1=float(self.betas[1]),
            beta2=float(self.betas[2]),
            model_kind=self.model_kind,
        )

    @property
    def counts(self) -> CountsSummary:
        return CountsSummary(n_A=self.n_A, n_CA=self.n_CA, n_TP=self.n_TP, n_FN=self.n_FN)

    @property
    def augmentation(self) -> Augmentation:
        return Augmentation(colonization_times=self.c.copy())

    def count_terms(self, n_CA: Optional[int] = None, n_FN: Optional[int] = None) -> float:
        counts = CountsSummary(
            n_A=self.n_A,
            n_CA=self.n_CA if n_CA is None else n_CA,
            n_TP=self.n_TP,
            n_FN=self.n_FN if n_FN is None else n_FN,
        )
        return log_count_terms(counts, self.p, self.phi)

    @property
    def loglik(self) -> float:
        return self.count_terms() + self.transmission

    @property
    def colonized_days(self) -> float:
        """定植病人在院的总天数"""
        c = self.c
        present = np.isfinite(c) & (c < self.arrays.d)
        return float(np.sum(self.arrays.d[present] - c[present]))

    def propose(self, j: int, new_c: float) -> Proposal:
        """计算将 c_j 改为 new_c 后的似然分量（不修改状态）"""
        arrays = self.arrays
        old_c = self.c[j]
        n_CA = self.n_CA
        if not arrays.readmission[j]:
            n_CA += int(new_c == arrays.a[j]) - int(old_c == arrays.a[j])
        n_FN = self.n_FN + arrays.false_negatives(j, new_c) - arrays.false_negatives(j, old_c)
        c = self.c.copy()
        c[j] = new_c
        statistics = transmission_statistics(timeline_from_arrays(arrays, c), self.model)
        return Proposal(j, new_c, n_CA, n_FN, statistics, statistics.log_term(self.betas))

    def proposal_log_ratio(self, proposal: Proposal) -> float:
        """log π(y, c̃ | θ) − log π(y, c | θ)"""
        new = self.count_terms(proposal.n_CA, proposal.n_FN) + proposal.transmission
        if new == -math.inf:
            return -math.inf
        current = self.loglik
        if current == -math.inf:
            raise SamplerException("当前状态的似然为 −∞，链无法继续")
        return new - current

    def commit(self, proposal: Proposal) -> None:
        j = proposal.episode
        was_colonized = math.isfinite(self.c[j])
        self.c[j] = proposal.new_c
        self.n_CA = proposal.n_CA
        self.n_FN = proposal.n_FN
        self.statistics = proposal.statistics
        self.transmission = proposal.transmission
        is_colonized = math.isfinite(proposal.new_c)
        if was_colonized and not is_colonized:
            self.n1.remove(j)
            self.n0.add(j)
        elif is_colonized and not was_colonized:
            self.n0.remove(j)
            self.n1.add(j)
