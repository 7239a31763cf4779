"""
病房时间线：在给定增广下计算分段常数的 S(t)、C(t)、Q(t)，以及速率函数的精确积分

同一时刻的事件按固定次序处理：
出院 → 隔离结束 → 定植 → 隔离开始 → 入院 → 检测。
易感者的隔离状态不影响任何速率，因而被忽略。
"""
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.types import Augmentation, Theta, WardArrays, WardData, compile_ward
from app.exceptions import ValidationException
from app.transmission.base import BaseTransmissionModel
from app.utils.model_factory import get_model


# 同一时刻内的事件次序
DISCHARGE = 0
PRECAUTION_END = 1
COLONIZATION = 2
PRECAUTION_START = 3
ADMISSION = 4
TEST = 5


class WardTimeline(BaseModel):
    """
    分段常数的病房状态

    times 为 0 = u₀ < u₁ < … < u_K = T_E；S、C、Q 为各区间 [u_k, u_{k+1}) 上的人数。
    event_* 为按全序排列的事件及每个事件之后的人数，用于左极限查询。
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    T_E: float
    times: np.ndarray
    S: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    event_time: np.ndarray
    event_rank: np.ndarray
    event_episode: np.ndarray
    event_S: np.ndarray
    event_C: np.ndarray
    event_Q: np.ndarray
    # 病房内定植（𝒦）的住院段及其定植前一瞬的 (S, C, Q)
    on_ward_episodes: np.ndarray
    on_ward_counts: np.ndarray

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n_intervals(self) -> int:
        return int(self.S.size)


def _events_before(timeline_or_arrays, t: float, rank: Optional[int], episode: Optional[int]) -> int:
    """全序中严格位于 (t, rank, episode) 之前的事件数"""
    event_time, event_rank, event_episode = timeline_or_arrays
    lo = int(np.searchsorted(event_time, t, side="left"))
    if rank is None:
        return lo
    hi = int(np.searchsorted(event_time, t, side="right"))
    key = (rank, -1 if episode is None else episode)
    k = lo
    while k < hi and (int(event_rank[k]), int(event_episode[k])) < key:
        k += 1
    return k


def timeline_from_arrays(arrays: WardArrays, c: np.ndarray) -> WardTimeline:
    """由编译后的病房数组与定植时间向量构建时间线（采样器内部直接调用）"""
    n = arrays.n
    a, d = arrays.a, arrays.d
    idx = np.arange(n)
    colonized = np.isfinite(c)

    # 在院期间处于定植状态的住院段：[c_j, d_j)
    present_col = colonized & (c < d)
    col_idx = np.flatnonzero(present_col)
    col_c = c[col_idx]
    entry_rank = np.where(col_c <= a[col_idx], ADMISSION, COLONIZATION)

    # 定植且隔离：从“定植进入”与“隔离开始”中较晚者，到“隔离结束”与“出院”中较早者
    if arrays.prec_episode.size:
        mask = present_col[arrays.prec_episode]
    else:
        mask = np.zeros(0, dtype=bool)
    pj = arrays.prec_episode[mask]
    s = arrays.prec_start[mask]
    e = arrays.prec_end[mask]
    cj = c[pj]
    er = np.where(cj <= a[pj], ADMISSION, COLONIZATION)
    start_later = (s > cj) | ((s == cj) & (PRECAUTION_START > er))
    on_t = np.where(start_later, s, cj)
    on_r = np.where(start_later, PRECAUTION_START, er)
    dj = d[pj]
    end_first = e < dj
    off_t = np.where(end_first, e, dj)
    off_r = np.where(end_first, PRECAUTION_END, DISCHARGE)
    valid = (on_t < off_t) | ((on_t == off_t) & (on_r < off_r))
    pj, on_t, on_r, off_t, off_r = pj[valid], on_t[valid], on_r[valid], off_t[valid], off_r[valid]

    n_col = col_idx.size
    n_q = pj.size
    time = np.concatenate([a, d, col_c, d[col_idx], on_t, off_t])
    rank = np.concatenate([
        np.full(n, ADMISSION), np.full(n, DISCHARGE),
        entry_rank, np.full(n_col, DISCHARGE),
        on_r, off_r,
    ]).astype(np.int64)
    episode = np.concatenate([idx, idx, col_idx, col_idx, pj, pj]).astype(np.int64)
    zeros_n, zeros_c, zeros_q = np.zeros(n), np.zeros(n_col), np.zeros(n_q)
    ones_n, ones_c, ones_q = np.ones(n), np.ones(n_col), np.ones(n_q)
    d_present = np.concatenate([ones_n, -ones_n, zeros_c, zeros_c, zeros_q, zeros_q])
    d_col = np.concatenate([zeros_n, zeros_n, ones_c, -ones_c, zeros_q, zeros_q])
    d_q = np.concatenate([zeros_n, zeros_n, zeros_c, zeros_c, ones_q, -ones_q])

    order = np.lexsort((episode, rank, time))
    time_sorted = time[order]
    present_cum = np.cumsum(d_present[order])
    col_cum = np.cumsum(d_col[order])
    q_cum = np.cumsum(d_q[order])
    event_S = present_cum - col_cum
    event_C = col_cum - q_cum
    event_Q = q_cum

    # 区间常数：每个不同时刻的最后一个事件之后的人数
    if time_sorted.size:
        last = np.flatnonzero(np.r_[time_sorted[1:] != time_sorted[:-1], True])
        starts = time_sorted[last]
        seg_S, seg_C, seg_Q = event_S[last], event_C[last], event_Q[last]
        keep = starts < arrays.T_E
        starts, seg_S, seg_C, seg_Q = starts[keep], seg_S[keep], seg_C[keep], seg_Q[keep]
    else:
        starts = seg_S = seg_C = seg_Q = np.zeros(0)
    if starts.size == 0 or starts[0] > 0:
        starts = np.r_[0.0, starts]
        seg_S, seg_C, seg_Q = np.r_[0.0, seg_S], np.r_[0.0, seg_C], np.r_[0.0, seg_Q]
    times = np.r_[starts, arrays.T_E]

    # 病房内定植 𝒦：非再入院、已定植且 c > a
    on_ward = np.flatnonzero(colonized & ~arrays.readmission & (c > a))
    on_ward_counts = np.zeros((on_ward.size, 3))
    if on_ward.size:
        inverse = np.empty(order.size, dtype=np.int64)
        inverse[order] = np.arange(order.size)
        entry_position = {int(j): int(inverse[2 * n + k]) for k, j in enumerate(col_idx)}
        event_rank_sorted = rank[order]
        event_episode_sorted = episode[order]
        for row, j in enumerate(on_ward):
            position = entry_position.get(int(j))
            if position is None:
                # c_j = d_j：没有在院定植区间，按全序直接查询
                position = _events_before(
                    (time_sorted, event_rank_sorted, event_episode_sorted), c[j], COLONIZATION, int(j)
                )
            if position > 0:
                on_ward_counts[row] = (
                    event_S[position - 1], event_C[position - 1], event_Q[position - 1]
                )

    return WardTimeline(
        T_E=arrays.T_E,
        times=times,
        S=seg_S,
        C=seg_C,
        Q=seg_Q,
        event_time=time_sorted,
        event_rank=rank[order],
        event_episode=episode[order],
        event_S=event_S,
        event_C=event_C,
        event_Q=event_Q,
        on_ward_episodes=on_ward,
        on_ward_counts=on_ward_counts,
    )


def build_timeline(ward: WardData, augmentation: Augmentation) -> WardTimeline:
    """
    构建病房时间线

    Args:
        ward: 病房数据
        augmentation: 满足不变量的定植增广

    Returns:
        分段常数的 S、C、Q 及事件序列
    """
    return timeline_from_arrays(compile_ward(ward), augmentation.colonization_times)


def counts_just_before(
    timeline: WardTimeline,
    t: float,
    rank: Optional[int] = None,
    episode: Optional[int] = None,
) -> Tuple[int, int, int]:
    """
    t 时刻的左极限 (S, C, Q)

    不给 rank 时排除所有发生在 t 的事件；给出 rank（以及 episode）时，
    按同一时刻的事件全序包含排在它之前的事件。

    Raises:
        ValidationException: t 不在 (0, T_E] 内
    """
    if not (0 < t <= timeline.T_E):
        raise ValidationException(f"左极限时刻 {t} 不在 (0, {timeline.T_E}] 内")
    k = _events_before((timeline.event_time, timeline.event_rank, timeline.event_episode), t, rank, episode)
    if k == 0:
        return 0, 0, 0
    return (
        int(timeline.event_S[k - 1]),
        int(timeline.event_C[k - 1]),
        int(timeline.event_Q[k - 1]),
    )


def integrate_hazard(timeline: WardTimeline, theta: Theta) -> float:
    """
    精确计算 ∫ S(t)·λ(t) dt

    Args:
        timeline: 病房时间线
        theta: 模型参数（model_kind 决定 λ 的形式）

    Returns:
        非负积分值
    """
    model = get_model(theta.model_kind)
    rates = model.rate(theta, timeline.C, timeline.Q)
    return float(np.sum(timeline.durations * timeline.S * rates))


def hazard_exposures(timeline: WardTimeline, model: BaseTransmissionModel) -> np.ndarray:
    """
    β 的三个暴露量 (∫S, ∫S·x₁, ∫S·x₂)，积分 = β · 暴露量
    """
    weights = timeline.durations * timeline.S
    return weights @ model.design(timeline.C, timeline.Q)


def on_ward_design(timeline: WardTimeline, model: BaseTransmissionModel) -> np.ndarray:
    """𝒦 中每次定植前一瞬的设计行 [1, x₁, x₂]"""
    counts = timeline.on_ward_counts
    return model.design(counts[:, 1], counts[:, 2])
