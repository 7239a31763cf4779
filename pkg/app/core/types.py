"""
核心领域类型：时间、病人住院段、检测、参数与定植增广

时间以距研究开始 T_S 的天数表示（T_S ≡ 0，T_E 为研究时长）。
"""
import math
from collections import defaultdict
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import settings
from app.exceptions import ValidationException
from app.utils.cache import LRUCacheWrapper


INF = math.inf


class AdmissionClass(str, Enum):
    """入院分类"""
    NEW_ADMISSION = "new_admission"
    COLONIZED_ON_READMISSION = "colonized_on_readmission"


class ModelKind(str, Enum):
    """传播模型种类"""
    FULL = "full"
    NO_BACKGROUND = "no_background"
    NON_LINEAR = "non_linear"


class SwabResult(BaseModel):
    """一次拭子检测结果"""
    model_config = ConfigDict(frozen=True)

    time: float
    positive: bool


class PatientEpisode(BaseModel):
    """
    一个形式上的“病人”：一次入院到出院的住院段

    precautions 为半开区间 [start, end)，均位于 [a, d] 内。
    """
    model_config = ConfigDict(frozen=True)

    episode_id: str
    person_id: str
    a: float
    d: float
    tests: Tuple[SwabResult, ...] = ()
    precautions: Tuple[Tuple[float, float], ...] = ()
    admission_class: AdmissionClass = AdmissionClass.NEW_ADMISSION

    @model_validator(mode="after")
    def _check_invariants(self) -> "PatientEpisode":
        if not self.a < self.d:
            raise ValueError(f"住院段 {self.episode_id}: 入院时间 {self.a} 必须早于出院时间 {self.d}")
        previous = -INF
        for test in self.tests:
            if not (self.a <= test.time <= self.d):
                raise ValueError(f"住院段 {self.episode_id}: 检测时间 {test.time} 不在 [{self.a}, {self.d}] 内")
            if test.time < previous:
                raise ValueError(f"住院段 {self.episode_id}: 检测未按时间排序")
            previous = test.time
        previous_end = -INF
        for start, end in self.precautions:
            if not (self.a <= start < end <= self.d):
                raise ValueError(
                    f"住院段 {self.episode_id}: 隔离区间 [{start}, {end}) 不在 [{self.a}, {self.d}] 内"
                )
            if start < previous_end:
                raise ValueError(f"住院段 {self.episode_id}: 隔离区间未排序或相互重叠")
            previous_end = end
        return self

    @property
    def first_positive(self) -> float:
        """首次阳性检测时间 t_j（无阳性为 +∞）"""
        for test in self.tests:
            if test.positive:
                return test.time
        return INF

    @property
    def first_precaution(self) -> float:
        """首次隔离开始时间 p_j（从未隔离为 +∞）"""
        return self.precautions[0][0] if self.precautions else INF

    @property
    def positive_times(self) -> List[float]:
        return [test.time for test in self.tests if test.positive]

    @property
    def is_readmission(self) -> bool:
        return self.admission_class == AdmissionClass.COLONIZED_ON_READMISSION

    def is_isolated_at(self, t: float) -> bool:
        """t 时刻是否处于隔离（半开区间）"""
        return any(start <= t < end for start, end in self.precautions)


class WardData(BaseModel):
    """一个病房在研究窗口 [0, T_E] 内的全部住院段"""
    model_config = ConfigDict(frozen=True)

    ward_id: str
    T_E: float = Field(gt=0)
    episodes: Tuple[PatientEpisode, ...] = ()
    readmission_window: float = Field(default=180.0, ge=0)

    @model_validator(mode="after")
    def _check_window(self) -> "WardData":
        seen = set()
        for episode in self.episodes:
            if episode.a < 0 or episode.d > self.T_E:
                raise ValueError(
                    f"病房 {self.ward_id}: 住院段 {episode.episode_id} 超出研究窗口 [0, {self.T_E}]"
                )
            if episode.episode_id in seen:
                raise ValueError(f"病房 {self.ward_id}: 住院段编号重复 {episode.episode_id}")
            seen.add(episode.episode_id)
        return self

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)

    @property
    def n_new_admissions(self) -> int:
        """新入院数 n_A"""
        return sum(1 for e in self.episodes if e.admission_class == AdmissionClass.NEW_ADMISSION)

    @property
    def n_readmissions(self) -> int:
        return self.n_episodes - self.n_new_admissions

    def occupancy(self, t: float) -> int:
        """t 时刻在院人数（a ≤ t < d）"""
        return sum(1 for e in self.episodes if e.a <= t < e.d)

    def max_occupancy(self) -> int:
        """研究期间最大瞬时在院人数"""
        events = sorted(
            [(e.d, -1) for e in self.episodes] + [(e.a, 1) for e in self.episodes]
        )
        current = peak = 0
        for _, delta in events:
            current += delta
            peak = max(peak, current)
        return peak


class Theta(BaseModel):
    """模型参数 θ = (p, φ, β₀, β₁, β₂)"""
    model_config = ConfigDict(frozen=True)

    p: float = Field(ge=0, le=1)
    phi: float = Field(ge=0, le=1)
    beta0: float = Field(ge=0)
    beta1: float = Field(ge=0)
    beta2: float = Field(ge=0)
    model_kind: ModelKind = ModelKind.FULL

    @property
    def betas(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2], dtype=float)

    def with_beta(self, index: int, value: float) -> "Theta":
        """替换第 index 个 β（不做校验，调用方保证非负）"""
        return self.model_copy(update={f"beta{index}": float(value)})


class CountsSummary(BaseModel):
    """似然中的计数统计"""
    model_config = ConfigDict(frozen=True)

    n_A: int = Field(ge=0)
    n_CA: int = Field(ge=0)
    n_TP: int = Field(ge=0)
    n_FN: int = Field(ge=0)


class AugmentationPartition(BaseModel):
    """住院段按当前增广划分：𝒫、𝒩₁、𝒩₀ 与再入院定植集合"""
    model_config = ConfigDict(frozen=True)

    positive: Tuple[int, ...]
    colonized_negative: Tuple[int, ...]
    uncolonized_negative: Tuple[int, ...]
    readmission: Tuple[int, ...]


class Augmentation(BaseModel):
    """
    潜在定植增广 c

    colonization_times[j] 为住院段 j 的定植时间；+∞ 表示从未定植。
    只在单条链内部被修改。
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    colonization_times: np.ndarray

    @classmethod
    def initial(cls, ward: WardData) -> "Augmentation":
        """初始增广：𝒫 中 c_j = t_j，再入院 c_j = a_j，其余未定植"""
        times = np.full(ward.n_episodes, INF)
        for j, episode in enumerate(ward.episodes):
            if episode.is_readmission:
                times[j] = episode.a
            elif episode.first_positive < INF:
                times[j] = episode.first_positive
        return cls(colonization_times=times)

    @classmethod
    def from_mapping(cls, ward: WardData, times: Dict[str, float]) -> "Augmentation":
        """由 {episode_id: c} 构造（未列出的住院段取初始增广的值）"""
        base = cls.initial(ward).colonization_times
        for j, episode in enumerate(ward.episodes):
            if episode.episode_id in times:
                base[j] = float(times[episode.episode_id])
        return cls(colonization_times=base)

    def copy(self) -> "Augmentation":
        return Augmentation(colonization_times=self.colonization_times.copy())

    def is_colonized(self, j: int) -> bool:
        return bool(np.isfinite(self.colonization_times[j]))

    def partition(self, ward: WardData) -> AugmentationPartition:
        positive, n1, n0, readmission = [], [], [], []
        for j, episode in enumerate(ward.episodes):
            if episode.is_readmission:
                readmission.append(j)
            elif episode.first_positive < INF:
                positive.append(j)
            elif self.is_colonized(j):
                n1.append(j)
            else:
                n0.append(j)
        return AugmentationPartition(
            positive=tuple(positive),
            colonized_negative=tuple(n1),
            uncolonized_negative=tuple(n0),
            readmission=tuple(readmission),
        )

    def validate_against(self, ward: WardData) -> None:
        """
        校验增广不变量

        Raises:
            ValidationException: 任一不变量被破坏
        """
        c = self.colonization_times
        if c.shape != (ward.n_episodes,):
            raise ValidationException(f"增广长度 {c.shape} 与住院段数 {ward.n_episodes} 不一致")
        if np.isnan(c).any():
            raise ValidationException("增广中存在 NaN")
        for j, episode in enumerate(ward.episodes):
            cj = c[j]
            if episode.is_readmission:
                if cj != episode.a:
                    raise ValidationException(f"再入院定植住院段 {episode.episode_id} 的 c 必须等于 a")
            elif episode.first_positive < INF:
                if not (episode.a <= cj <= episode.first_positive):
                    raise ValidationException(
                        f"阳性住院段 {episode.episode_id}: c={cj} 不在 [a, t_j]=[{episode.a}, {episode.first_positive}] 内"
                    )
            elif np.isfinite(cj) and not (episode.a <= cj <= episode.d):
                raise ValidationException(
                    f"住院段 {episode.episode_id}: c={cj} 不在 [a, d]=[{episode.a}, {episode.d}] 内"
                )


def make_episode_id(person_id: str, ordinal: int) -> str:
    """住院段编号：同一人按入院先后从 1 开始编号"""
    return f"{person_id}#{ordinal}"


def classify_admissions(
    episodes: Sequence[PatientEpisode],
    readmission_window: float,
) -> List[AdmissionClass]:
    """
    判定每个住院段是新入院还是再入院定植

    某人在本次入院前 readmission_window 天内（0 ≤ a − τ < window）有过阳性检测 τ，
    则本次为再入院定植；入院同一时刻的阳性检测算作“之前”。

    Args:
        episodes: 住院段（可包含多人，顺序任意）
        readmission_window: 携带窗口（天）

    Returns:
        与输入顺序对应的入院分类

    Raises:
        ValidationException: 同一人的住院段相互重叠
    """
    by_person: Dict[str, List[int]] = defaultdict(list)
    for index, episode in enumerate(episodes):
        by_person[episode.person_id].append(index)

    classes: List[Optional[AdmissionClass]] = [None] * len(episodes)
    for person_id, indices in by_person.items():
        ordered = sorted(indices, key=lambda i: (episodes[i].a, episodes[i].d))
        positives: List[float] = []
        previous = None
        for i in ordered:
            episode = episodes[i]
            if previous is not None and episode.a < previous.d:
                raise ValidationException(
                    f"病人 {person_id} 的住院段 {previous.episode_id} 与 {episode.episode_id} 相互重叠"
                )
            readmitted = any(0 <= episode.a - tau < readmission_window for tau in positives)
            classes[i] = (
                AdmissionClass.COLONIZED_ON_READMISSION if readmitted else AdmissionClass.NEW_ADMISSION
            )
            positives.extend(episode.positive_times)
            previous = episode
    return classes


class WardArrays(BaseModel):
    """WardData 的数值视图，供时间线、似然与采样器使用"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int
    T_E: float
    a: np.ndarray
    d: np.ndarray
    first_positive: np.ndarray
    first_precaution: np.ndarray
    readmission: np.ndarray
    positive_idx: np.ndarray
    negative_idx: np.ndarray
    readmission_idx: np.ndarray
    prec_episode: np.ndarray
    prec_start: np.ndarray
    prec_end: np.ndarray
    negative_times: Tuple[np.ndarray, ...]
    n_true_positive: int
    n_new_admissions: int

    def false_negatives(self, j: int, c: float) -> int:
        """住院段 j 在定植时间 c 及之后的阴性检测数"""
        if not np.isfinite(c):
            return 0
        times = self.negative_times[j]
        return int(times.size - np.searchsorted(times, c, side="left"))


_compiled_cache = LRUCacheWrapper(max_size=settings.CACHE_MAX_SIZE, ttl=settings.CACHE_TTL)


def compile_ward(ward: WardData) -> WardArrays:
    """
    编译（并缓存）病房的数值视图

    缓存以对象身份为键，条目同时持有病房引用以防止身份被复用。
    """
    entry = _compiled_cache.get(id(ward))
    if entry is not None and entry[0] is ward:
        return entry[1]

    episodes = ward.episodes
    n = len(episodes)
    a = np.array([e.a for e in episodes], dtype=float)
    d = np.array([e.d for e in episodes], dtype=float)
    first_positive = np.array([e.first_positive for e in episodes], dtype=float)
    first_precaution = np.array([e.first_precaution for e in episodes], dtype=float)
    readmission = np.array([e.is_readmission for e in episodes], dtype=bool)
    has_positive = np.isfinite(first_positive)

    prec_episode, prec_start, prec_end = [], [], []
    for j, episode in enumerate(episodes):
        for start, end in episode.precautions:
            prec_episode.append(j)
            prec_start.append(start)
            prec_end.append(end)

    arrays = WardArrays(
        n=n,
        T_E=ward.T_E,
        a=a,
        d=d,
        first_positive=first_positive,
        first_precaution=first_precaution,
        readmission=readmission,
        positive_idx=np.flatnonzero(~readmission & has_positive),
        negative_idx=np.flatnonzero(~readmission & ~has_positive),
        readmission_idx=np.flatnonzero(readmission),
        prec_episode=np.array(prec_episode, dtype=np.int64),
        prec_start=np.array(prec_start, dtype=float),
        prec_end=np.array(prec_end, dtype=float),
        negative_times=tuple(
            np.array([t.time for t in e.tests if not t.positive], dtype=float) for e in episodes
        ),
        n_true_positive=sum(len(e.positive_times) for e in episodes),
        n_new_admissions=int(n - readmission.sum()),
    )
    _compiled_cache.set(id(ward), (ward, arrays))
    return arrays
