"""
未检出携带与等待隔离的比例，以及逐月患病率
"""
import math
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.types import Augmentation, WardData, compile_ward
from app.exceptions import InsufficientSamplesException, ValidationException
from app.mcmc.samples import PosteriorSamples


def hidden_carriage(augmentation: Augmentation, ward: WardData) -> Optional[Tuple[float, float]]:
    """
    定植病人在院天数中未检出且未隔离的比例 P_hidden，与首次阳性后等待隔离的比例 P_wait

    P_hidden = Σ max(min(p_j, d_j) − c_j, 0) / Σ (d_j − c_j)
    P_wait   = Σ_{p_j ∈ [t_j, d_j]} (p_j − t_j) / Σ (d_j − c_j)
    求和均只取已定植的住院段；p_j 为首次隔离开始，t_j 为首次阳性。

    Returns:
        (P_hidden, P_wait)；没有定植天数时返回 None
    """
    arrays = compile_ward(ward)
    c = augmentation.colonization_times
    colonized = np.isfinite(c)
    if not colonized.any():
        return None
    onset = c[colonized]
    d = arrays.d[colonized]
    p = arrays.first_precaution[colonized]
    t = arrays.first_positive[colonized]
    denominator = float(np.sum(d - onset))
    if denominator <= 0:
        return None
    hidden = float(np.sum(np.maximum(np.minimum(p, d) - onset, 0.0))) / denominator
    waiting = np.isfinite(p) & np.isfinite(t) & (t <= p) & (p <= d)
    wait = float(np.sum(p[waiting] - t[waiting])) / denominator
    if not (0.0 <= hidden <= 1.0 + 1e-12 and 0.0 <= wait <= 1.0 + 1e-12):
        raise ValidationException(f"病房 {ward.ward_id}: 比例越界 P_hidden={hidden}, P_wait={wait}")
    return hidden, wait


def carriage_posterior(samples: PosteriorSamples, ward: WardData) -> pd.DataFrame:
    """
    在每个增广快照上计算 (P_hidden, P_wait)

    Raises:
        InsufficientSamplesException: 没有快照
    """
    if samples.n_snapshots == 0:
        raise InsufficientSamplesException(
            f"{samples.ward_id}/{samples.model_kind.value}: 没有增广快照，无法估计未检出携带"
        )
    rows = []
    for k in range(samples.n_snapshots):
        result = hidden_carriage(samples.snapshot(k), ward)
        if result is None:
            continue
        iteration = int(samples.snapshot_iterations[k]) if k < len(samples.snapshot_iterations) else -1
        rows.append((k, iteration, result[0], result[1]))
    return pd.DataFrame(rows, columns=["snapshot", "iteration", "p_hidden", "p_wait"])


def _interval(values: np.ndarray) -> Dict[str, float]:
    if values.size == 0:
        return {"median": math.nan, "lower": math.nan, "upper": math.nan}
    lower, median, upper = np.quantile(values, [0.025, 0.5, 0.975])
    return {"median": float(median), "lower": float(lower), "upper": float(upper)}


def carriage_summary(frame: pd.DataFrame) -> Dict[str, Dict[str, float]]:
    """P_hidden、P_wait 的后验中位数与 95% 可信区间"""
    return {
        "p_hidden": _interval(frame["p_hidden"].to_numpy(dtype=float)),
        "p_wait": _interval(frame["p_wait"].to_numpy(dtype=float)),
        "n_snapshots": int(len(frame)),
    }


def _daily_fractions(status: np.ndarray, present: np.ndarray) -> np.ndarray:
    n_present = present.sum(axis=1)
    known = (status & present).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n_present > 0, known / np.maximum(n_present, 1), np.nan)


def _block_means(values: np.ndarray, blocks: np.ndarray, n_blocks: int) -> np.ndarray:
    out = np.full(n_blocks, np.nan)
    for b in range(n_blocks):
        chunk = values[blocks == b]
        if np.isfinite(chunk).any():
            out[b] = np.nanmean(chunk)
    return out


def monthly_prevalence(
    ward: WardData,
    snapshots: np.ndarray,
    block_days: int = 30,
) -> pd.DataFrame:
    """
    观测与预测的逐月患病率

    每天在中点时刻计算“已知阳性（首次阳性之后或再入院定植）在院人数 / 在院人数”，
    按 block_days 天分块取平均；预测值用每个快照的潜在定植状态，
    汇总为快照间的中位数与标准差。

    Args:
        ward: 病房数据
        snapshots: 增广快照（行为快照）
        block_days: 分块天数
    """
    if block_days <= 0:
        raise ValidationException(f"分块天数必须为正: {block_days}")
    arrays = compile_ward(ward)
    n_days = int(math.ceil(ward.T_E))
    midpoints = np.arange(n_days, dtype=float) + 0.5
    midpoints = midpoints[midpoints < ward.T_E]
    blocks = (np.arange(midpoints.size) // block_days).astype(np.int64)
    n_blocks = int(blocks.max()) + 1 if blocks.size else 0

    m = midpoints[:, None]
    present = (arrays.a[None, :] <= m) & (m < arrays.d[None, :])
    known = arrays.readmission[None, :] | (arrays.first_positive[None, :] <= m)
    observed = _block_means(_daily_fractions(known, present), blocks, n_blocks)

    snapshots = np.asarray(snapshots, dtype=float).reshape(-1, arrays.n)
    predicted = np.full((snapshots.shape[0], n_blocks), np.nan)
    for k, c in enumerate(snapshots):
        predicted[k] = _block_means(_daily_fractions(c[None, :] <= m, present), blocks, n_blocks)

    starts = np.arange(n_blocks) * block_days
    with np.errstate(invalid="ignore"):
        median = np.nanmedian(predicted, axis=0) if snapshots.shape[0] else np.full(n_blocks, np.nan)
        sd = np.nanstd(predicted, axis=0, ddof=1) if snapshots.shape[0] > 1 else np.full(n_blocks, np.nan)
    return pd.DataFrame({
        "block": np.arange(n_blocks),
        "start": starts.astype(float),
        "end": np.minimum(starts + block_days, ward.T_E).astype(float),
        "observed": observed,
        "predicted_median": median,
        "predicted_sd": sd,
    })


def prevalence_overview(frame: pd.DataFrame) -> Dict[str, float]:
    """各块观测与预测患病率的均值（标准差）"""
    observed = frame["observed"].dropna()
    predicted = frame["predicted_median"].dropna()
    return {
        "observed_mean": float(observed.mean()) if len(observed) else math.nan,
        "observed_sd": float(observed.std(ddof=1)) if len(observed) > 1 else math.nan,
        "predicted_mean": float(predicted.mean()) if len(predicted) else math.nan,
        "predicted_sd": float(predicted.std(ddof=1)) if len(predicted) > 1 else math.nan,
    }
