"""
合成病房：泊松到达、床位阻塞、对数正态住院时长，再做前向模拟
"""
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.types import Augmentation, ModelKind, Theta, WardData, make_episode_id
from app.exceptions import ValidationException
from app.simulate.engine import AdmissionFrame, simulate_outcome
from app.simulate.policy import PrecautionRule, ScreeningSchedule, SimPolicy
from app.utils.io import write_csv_atomic
from app.utils.logger import logger


def default_theta() -> Theta:
    """全模型的一组典型参数（/天）"""
    return Theta(p=0.78, phi=0.12, beta0=0.0084, beta1=0.0023, beta2=0.0025, model_kind=ModelKind.FULL)


class SyntheticWardConfig(BaseModel):
    """合成病房配置"""
    model_config = ConfigDict(frozen=True)

    ward_id: str = "SIM"
    beds: int = Field(default=10, gt=0)
    study_days: int = Field(default=510, gt=0)
    arrival_rate: float = Field(default=2.5, gt=0)
    los_median: float = Field(default=3.5, gt=0)
    los_sd: float = Field(default=5.0, gt=0)
    theta: Theta = Field(default_factory=default_theta)
    policy: SimPolicy = Field(
        default_factory=lambda: SimPolicy(
            test_schedule=ScreeningSchedule.ADMISSION_PLUS_WEEKLY,
            precaution_rule=PrecautionRule.ON_DETECTION,
        )
    )
    readmission_probability: float = Field(default=0.0, ge=0, le=1)
    readmission_window: float = Field(default=180.0, ge=0)
    seed: int = Field(default=0, ge=0)
    spawn_key: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_policy(self) -> "SyntheticWardConfig":
        if self.policy.test_schedule == ScreeningSchedule.REPLAY_OBSERVED:
            raise ValueError("合成病房没有可沿用的观测检测时间，检测策略必须为 weekly")
        if self.policy.precaution_rule == PrecautionRule.REPLAY_OBSERVED:
            raise ValueError("合成病房没有可沿用的观测隔离区间，隔离策略必须为 on_detection")
        return self

    @property
    def lognormal_parameters(self) -> Tuple[float, float]:
        """
        对数正态的 (μ, σ)：中位数 e^μ，标准差 sd

        sd² = m²·e^{σ²}(e^{σ²} − 1)，记 r = (sd/m)²，则 e^{σ²} = (1 + √(1 + 4r)) / 2。
        """
        r = (self.los_sd / self.los_median) ** 2
        sigma2 = math.log((1 + math.sqrt(1 + 4 * r)) / 2)
        return math.log(self.los_median), math.sqrt(sigma2)


class SyntheticWard(BaseModel):
    """合成病房及其真实参数与真实增广"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ward: WardData
    theta: Theta
    augmentation: Augmentation


def generate_admissions(config: SyntheticWardConfig, rng: np.random.Generator) -> AdmissionFrame:
    """
    逐日生成入出院

    每天的到达数 ~ Poisson(arrival_rate)；病房满员时到达被拒绝。
    住院天数 = max(1, ⌈LogNormal(μ, σ)⌉)，出院时间截断到研究结束。
    """
    mu, sigma = config.lognormal_parameters
    T_E = float(config.study_days)
    stays: List[Tuple[float, float, str, int]] = []
    occupied: List[float] = []
    visits: Dict[str, int] = {}
    away: List[str] = []
    discharge_of: Dict[str, float] = {}
    next_person = 0

    for day in range(config.study_days):
        t = float(day)
        occupied = [d for d in occupied if d > t]
        # 已出院的人才可以再入院
        for person in [p for p, d in discharge_of.items() if d <= t]:
            away.append(person)
            del discharge_of[person]
        for _ in range(int(rng.poisson(config.arrival_rate))):
            if len(occupied) >= config.beds:
                break
            if away and rng.random() < config.readmission_probability:
                person = away.pop(int(rng.integers(len(away))))
            else:
                next_person += 1
                person = f"P{next_person:05d}"
            los = max(1, math.ceil(rng.lognormal(mu, sigma)))
            d = min(t + los, T_E)
            occupied.append(d)
            visits[person] = visits.get(person, 0) + 1
            discharge_of[person] = d
            stays.append((t, d, person, visits[person]))

    stays.sort(key=lambda s: (s[0], s[1], make_episode_id(s[2], s[3])))
    n = len(stays)
    return AdmissionFrame(
        ward_id=config.ward_id,
        T_E=T_E,
        readmission_window=config.readmission_window,
        episode_ids=tuple(make_episode_id(person, k) for _, _, person, k in stays),
        person_ids=tuple(person for _, _, person, _ in stays),
        a=np.array([s[0] for s in stays], dtype=float),
        d=np.array([s[1] for s in stays], dtype=float),
        test_times=tuple(np.zeros(0) for _ in range(n)),
        precautions=tuple(() for _ in range(n)),
        carried_in=np.zeros(n, dtype=bool),
    )


def generate_synthetic_ward(config: SyntheticWardConfig) -> SyntheticWard:
    """
    生成合成病房

    Args:
        config: 合成病房配置

    Returns:
        可观测数据、真实参数与真实增广；相同配置给出相同结果
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=config.spawn_key))
    frame = generate_admissions(config, rng)
    if frame.n == 0:
        raise ValidationException(f"合成病房 {config.ward_id} 没有任何入院，请增大 arrival_rate 或 study_days")
    outcome = simulate_outcome(frame, config.theta, config.policy, rng)
    ward = outcome.to_ward_data()
    logger.info(
        f"合成病房 {config.ward_id}: {ward.n_episodes} 个住院段, "
        f"定植 {int(np.isfinite(outcome.colonization_times).sum())} 例"
    )
    return SyntheticWard(ward=ward, theta=config.theta, augmentation=outcome.augmentation())


class WardSummary(BaseModel):
    """病房描述性统计"""
    model_config = ConfigDict(frozen=True)

    ward_id: str
    n_episodes: int
    n_persons: int
    n_readmissions: int
    los_mean: float
    los_sd: float
    percent_precautions: float
    tests_mean: float
    tests_sd: float
    positives_mean: float
    positives_sd: float


def ward_summary_statistics(ward: WardData) -> WardSummary:
    """住院段数、住院时长、隔离比例、每人检测数与阳性数"""
    los = np.array([e.d - e.a for e in ward.episodes], dtype=float)
    tests = np.array([len(e.tests) for e in ward.episodes], dtype=float)
    positives = np.array([len(e.positive_times) for e in ward.episodes], dtype=float)
    isolated = np.array([bool(e.precautions) for e in ward.episodes], dtype=bool)

    def sd(values: np.ndarray) -> float:
        return float(values.std(ddof=1)) if values.size > 1 else 0.0

    def mean(values: np.ndarray) -> float:
        return float(values.mean()) if values.size else 0.0

    return WardSummary(
        ward_id=ward.ward_id,
        n_episodes=ward.n_episodes,
        n_persons=len({e.person_id for e in ward.episodes}),
        n_readmissions=ward.n_readmissions,
        los_mean=mean(los),
        los_sd=sd(los),
        percent_precautions=100.0 * mean(isolated.astype(float)),
        tests_mean=mean(tests),
        tests_sd=sd(tests),
        positives_mean=mean(positives),
        positives_sd=sd(positives),
    )


def format_summary_table(summaries: List[WardSummary]) -> str:
    """按描述性统计表的版式输出：每行一个病房"""
    header = f"{'病房':<10}{'病人数':>8}{'住院天数 均值(SD)':>20}{'隔离%':>8}{'每人检测 均值(SD)':>20}{'每人阳性 均值(SD)':>20}"
    lines = [header]
    for s in summaries:
        lines.append(
            f"{s.ward_id:<10}{s.n_episodes:>8}"
            f"{f'{s.los_mean:.1f} ({s.los_sd:.1f})':>20}"
            f"{s.percent_precautions:>8.1f}"
            f"{f'{s.tests_mean:.2f} ({s.tests_sd:.2f})':>20}"
            f"{f'{s.positives_mean:.2f} ({s.positives_sd:.2f})':>20}"
        )
    return "\n".join(lines)


def truth_frame(ward: WardData, augmentation: Augmentation) -> pd.DataFrame:
    """真实定植时间表：episode_id, colonization_time（未定植为 none）"""
    c = augmentation.colonization_times
    return pd.DataFrame({
        "episode_id": [e.episode_id for e in ward.episodes],
        "colonization_time": [repr(float(c[j])) if np.isfinite(c[j]) else "none" for j in range(ward.n_episodes)],
    })


def write_truth(path: Union[str, Path], wards: List[SyntheticWard]) -> Path:
    frames = []
    for synthetic in wards:
        frame = truth_frame(synthetic.ward, synthetic.augmentation)
        frame.insert(0, "ward_id", synthetic.ward.ward_id)
        frames.append(frame)
    return write_csv_atomic(path, pd.concat(frames, ignore_index=True))


def read_truth(path: Union[str, Path], ward: WardData, ward_id: Optional[str] = None) -> Augmentation:
    """读取真实定植时间表，按病房的住院段顺序返回增广"""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if ward_id is not None and "ward_id" in frame.columns:
        frame = frame[frame["ward_id"] == ward_id]
    times = {
        row.episode_id: (math.inf if row.colonization_time == "none" else float(row.colonization_time))
        for row in frame.itertuples()
    }
    missing = [e.episode_id for e in ward.episodes if e.episode_id not in times]
    if missing:
        raise ValidationException(f"{path} 缺少住院段: {', '.join(missing[:5])}")
    return Augmentation(colonization_times=np.array([times[e.episode_id] for e in ward.episodes], dtype=float))
