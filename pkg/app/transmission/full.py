"""
全模型与无背景传播模型
"""
from typing import Tuple

import numpy as np

from app.core.types import ModelKind
from app.transmission.base import ArrayLike, BaseTransmissionModel


class FullModel(BaseTransmissionModel):
    """全模型：λ = β₀ + β₁·C + β₂·Q"""

    kind = ModelKind.FULL
    description = "背景定植加上与定植病人数成正比的传播"

    def pressure(self, C: ArrayLike, Q: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(C, dtype=float), np.asarray(Q, dtype=float)


class NoBackgroundModel(FullModel):
    """
    无背景模型

    与全模型同一似然，只是 β₀ 的先验为 Exp(10⁶)，使其以高概率接近 0。
    """

    kind = ModelKind.NO_BACKGROUND
    description = "传播几乎全部来自病房内的定植病人"
    default_beta_rates = (1e6, 1e-6, 1e-6)
