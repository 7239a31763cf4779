"""
给定入出院框架的前向模拟

按时间顺序处理计划事件（入院、出院、检测、隔离开始/结束）；两次计划事件之间
定植率分段常数，用竞争指数分布精确抽取定植时刻，不做时间离散化。
同一时刻的事件次序与时间线相同。
"""
import heapq
import itertools
import math
from collections import defaultdict
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.timeline import ADMISSION, DISCHARGE, PRECAUTION_END, PRECAUTION_START, TEST
from app.core.types import (
    AdmissionClass,
    Augmentation,
    PatientEpisode,
    SwabResult,
    Theta,
    WardData,
)
from app.exceptions import ValidationException
from app.simulate.policy import PrecautionRule, ScreeningSchedule, SimPolicy
from app.utils.index_set import IndexSet
from app.utils.model_factory import get_model


INF = math.inf

_ADMIT, _DISCHARGE, _ISOLATE, _RELEASE, _TEST = range(5)


class AdmissionFrame(BaseModel):
    """
    模拟所用的入出院框架

    carried_in 标记携带状态来自研究窗口之前、模拟中无法重新推出的再入院定植住院段：
    该人在本病房的第一个住院段即为再入院定植，或其前一个住院段已是 carried_in 且本段仍为再入院定植。
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    ward_id: str
    T_E: float
    readmission_window: float
    episode_ids: Tuple[str, ...]
    person_ids: Tuple[str, ...]
    a: np.ndarray
    d: np.ndarray
    test_times: Tuple[np.ndarray, ...]
    precautions: Tuple[Tuple[Tuple[float, float], ...], ...]
    carried_in: np.ndarray

    @property
    def n(self) -> int:
        return len(self.episode_ids)

    @classmethod
    def from_ward(cls, ward: WardData) -> "AdmissionFrame":
        carried_in = np.zeros(ward.n_episodes, dtype=bool)
        chain: Dict[str, bool] = {}
        for j in sorted(range(ward.n_episodes), key=lambda k: ward.episodes[k].a):
            episode = ward.episodes[j]
            carried_in[j] = episode.is_readmission and chain.get(episode.person_id, True)
            chain[episode.person_id] = bool(carried_in[j])
        return cls(
            ward_id=ward.ward_id,
            T_E=ward.T_E,
            readmission_window=ward.readmission_window,
            episode_ids=tuple(e.episode_id for e in ward.episodes),
            person_ids=tuple(e.person_id for e in ward.episodes),
            a=np.array([e.a for e in ward.episodes], dtype=float),
            d=np.array([e.d for e in ward.episodes], dtype=float),
            test_times=tuple(np.array([t.time for t in e.tests], dtype=float) for e in ward.episodes),
            precautions=tuple(e.precautions for e in ward.episodes),
            carried_in=carried_in,
        )


class SimulationOutcome(BaseModel):
    """一次模拟的结果：真实定植时间与可观测数据"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    frame: AdmissionFrame
    colonization_times: np.ndarray
    readmission: np.ndarray
    tests: Tuple[Tuple[Tuple[float, bool], ...], ...]
    precautions: Tuple[Tuple[Tuple[float, float], ...], ...]

    def first_positive_times(self) -> np.ndarray:
        return np.array(
            [next((t for t, positive in tests if positive), INF) for tests in self.tests],
            dtype=float,
        )

    def augmentation(self) -> Augmentation:
        return Augmentation(colonization_times=self.colonization_times.copy())

    def to_ward_data(self) -> WardData:
        """可观测部分（入出院、检测、隔离、入院分类）"""
        frame = self.frame
        episodes = []
        for j in range(frame.n):
            tests = sorted(self.tests[j], key=lambda r: (r[0], r[1]))
            episodes.append(PatientEpisode(
                episode_id=frame.episode_ids[j],
                person_id=frame.person_ids[j],
                a=float(frame.a[j]),
                d=float(frame.d[j]),
                tests=tuple(SwabResult(time=t, positive=positive) for t, positive in tests),
                precautions=self.precautions[j],
                admission_class=(
                    AdmissionClass.COLONIZED_ON_READMISSION if self.readmission[j]
                    else AdmissionClass.NEW_ADMISSION
                ),
            ))
        return WardData(
            ward_id=frame.ward_id,
            T_E=frame.T_E,
            episodes=tuple(episodes),
            readmission_window=frame.readmission_window,
        )


def simulate_outcome(
    frame: AdmissionFrame,
    theta: Theta,
    policy: SimPolicy,
    rng: np.random.Generator,
) -> SimulationOutcome:
    """
    在固定的入出院框架上模拟定植、检测与隔离

    Args:
        frame: 入出院框架
        theta: 模型参数
        policy: 检测与隔离策略
        rng: 随机流

    Returns:
        真实定植时间与可观测数据
    """
    model = get_model(theta.model_kind)
    n = frame.n
    a, d = frame.a, frame.d
    window = frame.readmission_window
    replay_tests = policy.test_schedule == ScreeningSchedule.REPLAY_OBSERVED
    replay_precautions = policy.precaution_rule == PrecautionRule.REPLAY_OBSERVED

    heap: List[tuple] = []
    order = itertools.count()

    def push(t: float, rank: int, j: int, kind: int) -> None:
        heapq.heappush(heap, (t, rank, j, next(order), kind))

    for j in range(n):
        push(a[j], ADMISSION, j, _ADMIT)
        push(d[j], DISCHARGE, j, _DISCHARGE)
        if replay_tests:
            for t in frame.test_times[j]:
                push(float(t), TEST, j, _TEST)
        if replay_precautions:
            for start, end in frame.precautions[j]:
                push(start, PRECAUTION_START, j, _ISOLATE)
                push(end, PRECAUTION_END, j, _RELEASE)

    c = np.full(n, INF)
    readmission = np.zeros(n, dtype=bool)
    present = np.zeros(n, dtype=bool)
    isolated = np.zeros(n, dtype=bool)
    detected = np.zeros(n, dtype=bool)
    susceptible = IndexSet()
    n_C = n_Q = 0
    positives_by_person: Dict[str, List[float]] = defaultdict(list)
    tests: List[List[Tuple[float, bool]]] = [[] for _ in range(n)]
    precautions: List[List[Tuple[float, float]]] = (
        [list(p) for p in frame.precautions] if replay_precautions else [[] for _ in range(n)]
    )

    t = 0.0
    while heap:
        t_next = heap[0][0]
        # 下一个计划事件之前的定植（竞争指数）
        while susceptible:
            total = len(susceptible) * model.rate(theta, n_C, n_Q)
            if total <= 0:
                break
            t_col = t + rng.exponential(1.0 / total)
            if t_col >= t_next:
                break
            j = susceptible.choice(rng)
            susceptible.remove(j)
            c[j] = t_col
            if isolated[j]:
                n_Q += 1
            else:
                n_C += 1
            t = t_col

        t, _, j, _, kind = heapq.heappop(heap)
        colonized = c[j] < INF
        if kind == _ADMIT:
            present[j] = True
            person = frame.person_ids[j]
            if frame.carried_in[j] or any(0 <= a[j] - tau < window for tau in positives_by_person[person]):
                readmission[j] = True
                c[j] = a[j]
            elif rng.random() < theta.phi:
                c[j] = a[j]
            if c[j] < INF:
                if isolated[j]:
                    n_Q += 1
                else:
                    n_C += 1
            else:
                susceptible.add(j)
            if not replay_tests:
                k = 0
                while a[j] + k * policy.screening_interval < d[j]:
                    if rng.random() < policy.compliance:
                        push(a[j] + k * policy.screening_interval, TEST, j, _TEST)
                    k += 1
        elif kind == _DISCHARGE:
            present[j] = False
            if colonized:
                if isolated[j]:
                    n_Q -= 1
                else:
                    n_C -= 1
            else:
                susceptible.remove(j)
        elif kind == _ISOLATE:
            if not isolated[j]:
                isolated[j] = True
                if present[j] and colonized:
                    n_C -= 1
                    n_Q += 1
        elif kind == _RELEASE:
            if isolated[j]:
                isolated[j] = False
                if present[j] and colonized:
                    n_Q -= 1
                    n_C += 1
        else:
            positive = bool(colonized and c[j] <= t and rng.random() < theta.p)
            tests[j].append((t, positive))
            if positive:
                positives_by_person[frame.person_ids[j]].append(t)
                if not replay_precautions and not detected[j]:
                    detected[j] = True
                    start = t + policy.delay
                    if start < d[j]:
                        push(start, PRECAUTION_START, j, _ISOLATE)
                        precautions[j].append((start, float(d[j])))

    return SimulationOutcome(
        frame=frame,
        colonization_times=c,
        readmission=readmission,
        tests=tuple(tuple(entry) for entry in tests),
        precautions=tuple(tuple(entry) for entry in precautions),
    )


def simulate_colonization(
    ward: WardData,
    theta: Theta,
    policy: SimPolicy,
    rng: np.random.Generator,
) -> Tuple[WardData, Augmentation]:
    """
    在观测到的入出院时间上重新模拟定植、检测与隔离

    新入院以概率 φ 入院即定植；易感者按 λ(t) 定植；定植病人的检测以概率 p 阳性，
    易感者的检测总是阴性。再入院定植按模拟出的阳性检测动态判定。

    Returns:
        (模拟的可观测数据, 真实增广)
    """
    outcome = simulate_outcome(AdmissionFrame.from_ward(ward), theta, policy, rng)
    return outcome.to_ward_data(), outcome.augmentation()


def simulate_tests_given_augmentation(
    ward: WardData,
    augmentation: Augmentation,
    p: float,
    rng: np.random.Generator,
) -> WardData:
    """
    在观测检测时间上按给定增广重新抽取检测结果

    检测时已定植（c ≤ τ）则以概率 p 阳性，否则阴性；入院分类与隔离不变。
    """
    c = augmentation.colonization_times
    episodes = []
    for j, episode in enumerate(ward.episodes):
        tests = tuple(
            SwabResult(time=swab.time, positive=bool(c[j] <= swab.time and rng.random() < p))
            for swab in episode.tests
        )
        episodes.append(episode.model_copy(update={"tests": tests}))
    return ward.model_copy(update={"episodes": tuple(episodes)})


def detected_counts(
    first_positive: np.ndarray,
    readmission: np.ndarray,
    T_E: float,
    interval_days: float = 14.0,
) -> np.ndarray:
    """按首次阳性时间分箱计数（再入院定植不计）"""
    n_bins = max(1, math.ceil(T_E / interval_days))
    mask = np.isfinite(first_positive) & ~readmission
    bins = np.minimum((first_positive[mask] // interval_days).astype(np.int64), n_bins - 1)
    return np.bincount(bins, minlength=n_bins)


def detected_colonizations_by_interval(ward: WardData, interval_days: float = 14.0) -> np.ndarray:
    """
    每个时间区间内首次检出定植的病人数

    Args:
        ward: 可观测的病房数据
        interval_days: 区间长度（天）

    Returns:
        长度为 ⌈T_E / interval_days⌉ 的整数数组
    """
    if interval_days <= 0:
        raise ValidationException(f"区间长度必须为正: {interval_days}")
    first_positive = np.array([e.first_positive for e in ward.episodes], dtype=float)
    readmission = np.array([e.is_readmission for e in ward.episodes], dtype=bool)
    return detected_counts(first_positive, readmission, ward.T_E, interval_days)
