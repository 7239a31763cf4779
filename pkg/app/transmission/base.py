"""
传播模型基类
"""
from abc import ABC, abstractmethod
from typing import Tuple, Union

import numpy as np

from app.core.types import ModelKind, Theta


ArrayLike = Union[int, float, np.ndarray]


class BaseTransmissionModel(ABC):
    """
    传播模型基类

    定植率 λ(t) = β₀ + β₁·x₁(C(t)) + β₂·x₂(Q(t))，其中 (x₁, x₂) 为模型的“压力特征”。
    对 β 线性，因此似然中的积分可以拆成三个暴露量。
    """

    kind: ModelKind
    description: str = ""
    # β₀, β₁, β₂ 指数先验的默认速率
    default_beta_rates: Tuple[float, float, float] = (1e-6, 1e-6, 1e-6)

    @abstractmethod
    def pressure(self, C: ArrayLike, Q: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """
        计算压力特征

        Args:
            C: 已定植且未隔离的人数
            Q: 已定植且隔离的人数

        Returns:
            (x₁, x₂)，与输入同形
        """
        pass

    def design(self, C: ArrayLike, Q: ArrayLike) -> np.ndarray:
        """设计矩阵 [1, x₁, x₂]，最后一维长度为 3"""
        x1, x2 = self.pressure(C, Q)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return np.stack([np.ones_like(x1), x1, x2], axis=-1)

    def rate(self, theta: Theta, C: ArrayLike, Q: ArrayLike) -> Union[float, np.ndarray]:
        """
        单个易感者的定植率 λ

        Args:
            theta: 模型参数
            C: 已定植且未隔离的人数
            Q: 已定植且隔离的人数

        Returns:
            每天的定植率
        """
        x1, x2 = self.pressure(C, Q)
        value = theta.beta0 + theta.beta1 * np.asarray(x1, dtype=float) + theta.beta2 * np.asarray(x2, dtype=float)
        return float(value) if np.ndim(value) == 0 else value
