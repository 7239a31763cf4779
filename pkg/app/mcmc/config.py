"""
采样器配置
"""
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.likelihood import PriorConfig
from app.core.types import ModelKind


class SamplerConfig(BaseModel):
    """
    单条链的配置

    iterations 包含 burn_in；记录 burn_in 之后每 thin 次迭代的状态，
    共 (iterations − burn_in) // thin 个样本。
    """
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(default=200_000, gt=0)
    burn_in: int = Field(default=10_000, ge=0)
    thin: int = Field(default=10, gt=0)
    # 每个 β 的随机游走步长（/天）
    rw_sd: Tuple[float, float, float] = (0.002, 0.002, 0.002)
    # 提议“入院即定植”的概率 φ₀
    phi0: float = Field(default=0.3, gt=0, lt=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    spawn_key: Tuple[int, ...] = ()
    prior: PriorConfig = Field(default_factory=PriorConfig)
    model_kind: ModelKind = ModelKind.FULL
    moves_per_iteration: int = Field(default=1, gt=0)
    # 每隔多少个已记录样本保存一次完整增广（0 表示不保存）
    snapshot_stride: int = Field(default=10, ge=0)
    # 每隔多少次迭代用完整重算核对缓存的似然
    check_every: int = Field(default=1000, gt=0)
    progress_every: int = Field(default=10_000, ge=0)
    debug_checks: bool = False

    @field_validator("rw_sd")
    @classmethod
    def _rw_sd_positive(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not (s > 0) for s in value):
            raise ValueError(f"随机游走步长必须为正: {value}")
        return value

    @model_validator(mode="after")
    def _check_burn_in(self) -> "SamplerConfig":
        if self.burn_in >= self.iterations:
            raise ValueError(f"burn_in ({self.burn_in}) 必须小于 iterations ({self.iterations})")
        return self

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin
