"""
模型工厂 - 统一管理传播模型的创建
"""
from typing import Union

from app.core.types import ModelKind
from app.exceptions import ValidationException
from app.transmission.base import BaseTransmissionModel
from app.transmission.full import FullModel, NoBackgroundModel
from app.transmission.nonlinear import NonLinearModel


_MODELS = {
    ModelKind.FULL: FullModel(),
    ModelKind.NO_BACKGROUND: NoBackgroundModel(),
    ModelKind.NON_LINEAR: NonLinearModel(),
}


def get_model(kind: Union[ModelKind, str, None] = None) -> BaseTransmissionModel:
    """
    根据模型种类获取对应的传播模型

    Args:
        kind: 模型种类（None 表示全模型）

    Returns:
        传播模型实例（无状态，可共享）

    Raises:
        ValidationException: 未知的模型种类
    """
    if kind is None:
        return _MODELS[ModelKind.FULL]
    try:
        return _MODELS[ModelKind(kind)]
    except ValueError:
        raise ValidationException(
            f"不支持的模型种类: {kind}（可选: {', '.join(k.value for k in ModelKind)}）"
        )
