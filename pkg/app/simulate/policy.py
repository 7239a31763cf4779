"""
前向模拟中的检测与隔离策略
"""
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class ScreeningSchedule(str, Enum):
    """检测时间表"""
    REPLAY_OBSERVED = "replay"       # 沿用观测到的检测时间
    ADMISSION_PLUS_WEEKLY = "weekly"  # 入院时及此后每 7 天，各次以依从率执行


class PrecautionRule(str, Enum):
    """隔离规则"""
    REPLAY_OBSERVED = "replay"        # 沿用观测到的隔离区间
    ON_DETECTION = "on_detection"     # 首次阳性后 delay 天开始隔离直到出院


class SimPolicy(BaseModel):
    """
    模拟策略

    默认沿用观测检测时间，隔离在首次模拟阳性后 1 天开始。
    """
    model_config = ConfigDict(frozen=True)

    test_schedule: ScreeningSchedule = ScreeningSchedule.REPLAY_OBSERVED
    compliance: float = Field(default=0.9, ge=0, le=1)
    precaution_rule: PrecautionRule = PrecautionRule.ON_DETECTION
    delay: float = Field(default=1.0, ge=0)
    screening_interval: float = Field(default=7.0, gt=0)
