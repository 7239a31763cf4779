"""
后验摘要表、探索性周序列与参数恢复覆盖率
"""
import math
from typing import Dict

import numpy as np
import pandas as pd
from statsmodels.tsa.stattools import acf

from app.core.types import Theta, WardData, compile_ward
from app.exceptions import ValidationException
from app.mcmc.samples import PARAMETERS, PosteriorSamples
from app.simulate.engine import detected_colonizations_by_interval


def effective_sample_size(values: np.ndarray) -> float:
    """
    自相关估计的有效样本量

    相邻两阶自相关之和 Γ_k = ρ_{2k} + ρ_{2k+1} 一旦不为正即截断（初始正序列）。
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 4 or not np.all(np.isfinite(x)) or np.ptp(x) == 0:
        return float(n)
    rho = acf(x, nlags=n - 1, fft=True)
    total = 0.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if not pair > 0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1.0 / n)
    return float(min(n / tau, n))


def posterior_summary(samples: PosteriorSamples) -> pd.DataFrame:
    """
    每个参数的后验均值、中位数、标准差、2.5%/97.5% 分位数与有效样本量

    Returns:
        每行一个参数
    """
    rows = []
    for name in PARAMETERS:
        values = samples.column(name)
        if values.size == 0:
            rows.append((samples.ward_id, samples.model_kind.value, name) + (math.nan,) * 6)
            continue
        lower, median, upper = np.quantile(values, [0.025, 0.5, 0.975])
        rows.append((
            samples.ward_id,
            samples.model_kind.value,
            name,
            float(values.mean()),
            float(median),
            float(values.std(ddof=1)) if values.size > 1 else 0.0,
            float(lower),
            float(upper),
            effective_sample_size(values),
        ))
    return pd.DataFrame(
        rows,
        columns=["ward_id", "model", "parameter", "mean", "median", "sd", "lower", "upper", "ess"],
    )


def ward_exploration(ward: WardData, interval_days: float = 7.0) -> pd.DataFrame:
    """
    探索性序列：每个区间的首次检出数，以及区间起点的已检出定植在院人数与在院人数
    """
    if interval_days <= 0:
        raise ValidationException(f"区间长度必须为正: {interval_days}")
    arrays = compile_ward(ward)
    first_detected = detected_colonizations_by_interval(ward, interval_days)
    starts = np.arange(first_detected.size, dtype=float) * interval_days
    s = starts[:, None]
    present = (arrays.a[None, :] <= s) & (s < arrays.d[None, :])
    known = arrays.readmission[None, :] | (arrays.first_positive[None, :] <= s)
    return pd.DataFrame({
        "interval_start": starts,
        "first_detected": first_detected,
        "detected_present": (present & known).sum(axis=1),
        "present": present.sum(axis=1),
    })


def recovery_coverage(truth: Theta, samples: PosteriorSamples, level: float = 0.95) -> pd.DataFrame:
    """
    真值是否落在后验可信区间内

    Args:
        truth: 生成数据的真实参数
        samples: 后验样本
        level: 可信水平
    """
    if not 0 < level < 1:
        raise ValidationException(f"可信水平必须在 (0, 1) 内: {level}")
    tail = (1 - level) / 2
    true_values: Dict[str, float] = {name: float(getattr(truth, name)) for name in PARAMETERS}
    rows = []
    for name in PARAMETERS:
        values = samples.column(name)
        lower, median, upper = np.quantile(values, [tail, 0.5, 1 - tail])
        rows.append((
            samples.ward_id,
            name,
            true_values[name],
            float(lower),
            float(median),
            float(upper),
            bool(lower <= true_values[name] <= upper),
        ))
    return pd.DataFrame(rows, columns=["ward_id", "parameter", "truth", "lower", "median", "upper", "covered"])
