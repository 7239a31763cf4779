"""
非线性传播模型
"""
from typing import Tuple

import numpy as np

from app.core.types import ModelKind
from app.transmission.base import ArrayLike, BaseTransmissionModel


class NonLinearModel(BaseTransmissionModel):
    """非线性模型：只有定植病人的“存在”起作用，λ = β₀ + β₁·1{C>0} + β₂·1{Q>0}"""

    kind = ModelKind.NON_LINEAR
    description = "定植病人存在即饱和的传播"

    def pressure(self, C: ArrayLike, Q: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        return (np.asarray(C) > 0).astype(float), (np.asarray(Q) > 0).astype(float)
