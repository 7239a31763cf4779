#!/usr/bin/env python3
"""
病房时间线测试
使用方法: python3 test_timeline.py
"""
import math
import os
import sys

import numpy as np
import pytest

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.core.timeline import COLONIZATION, build_timeline, counts_just_before, hazard_exposures, integrate_hazard
from app.core.types import AdmissionClass, Augmentation, ModelKind, PatientEpisode, SwabResult, Theta, WardData
from app.exceptions import ValidationException
from app.simulate.synthetic import SyntheticWardConfig, default_theta, generate_synthetic_ward
from app.utils.model_factory import get_model


def episode(episode_id, a, d, tests=(), precautions=(), admission_class=AdmissionClass.NEW_ADMISSION):
    return PatientEpisode(
        episode_id=episode_id,
        person_id=episode_id.split("#")[0],
        a=a,
        d=d,
        tests=tuple(SwabResult(time=t, positive=positive) for t, positive in tests),
        precautions=tuple(precautions),
        admission_class=admission_class,
    )


def augmentation(*values):
    return Augmentation(colonization_times=np.array(values, dtype=float))


def state_at(timeline, t):
    """t 所在区间上的 (S, C, Q)"""
    k = int(np.searchsorted(timeline.times, t, side="right")) - 1
    return int(timeline.S[k]), int(timeline.C[k]), int(timeline.Q[k])


def test_single_uncolonized_patient():
    ward = WardData(ward_id="M1", T_E=10, episodes=(episode("A#1", 0, 10),))
    tl = build_timeline(ward, augmentation(math.inf))
    assert tl.times[0] == 0 and tl.times[-1] == 10
    assert np.all(tl.S == 1)
    assert np.all(tl.C == 0) and np.all(tl.Q == 0)


def test_colonized_on_admission_with_precautions():
    """入院即定植，[4,10) 隔离：[0,4) 上 C=1，[4,10) 上 Q=1"""
    ward = WardData(ward_id="M1", T_E=10, episodes=(episode("A#1", 0, 10, precautions=[(4, 10)]),))
    tl = build_timeline(ward, augmentation(0))
    assert state_at(tl, 2) == (0, 1, 0)
    assert state_at(tl, 4) == (0, 0, 1)
    assert state_at(tl, 9.9) == (0, 0, 1)


def test_colonization_during_stay():
    ward = WardData(ward_id="M1", T_E=10, episodes=(episode("A#1", 0, 10), episode("B#1", 0, 10)))
    tl = build_timeline(ward, augmentation(math.inf, 5))
    assert state_at(tl, 1) == (2, 0, 0)
    assert state_at(tl, 5) == (1, 1, 0)
    # 左极限不包含事件本身
    assert counts_just_before(tl, 5) == (2, 0, 0)
    assert counts_just_before(tl, 3) == (2, 0, 0)
    assert tl.on_ward_episodes.tolist() == [1]
    assert tl.on_ward_counts[0].tolist() == [2.0, 0.0, 0.0]


def test_times_strictly_increasing_and_cover_window():
    ward = WardData(ward_id="M1", T_E=20, episodes=(
        episode("A#1", 0, 6, precautions=[(2, 6)]),
        episode("B#1", 3, 15),
        episode("C#1", 6, 20),
    ))
    tl = build_timeline(ward, augmentation(1, 8, math.inf))
    assert tl.times[0] == 0 and tl.times[-1] == 20
    assert np.all(np.diff(tl.times) > 0)
    assert tl.n_intervals == tl.times.size - 1
    for t in (0.5, 2.5, 4.0, 7.0, 10.0, 16.0):
        s, c, q = state_at(tl, t)
        assert s + c + q == ward.occupancy(t)


def test_discharge_ordered_before_colonization():
    """同一时刻出院先于定植：离开的病人不计入后续定植的左极限"""
    ward = WardData(ward_id="M1", T_E=10, episodes=(
        episode("A#1", 0, 5, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("B#1", 0, 10),
    ))
    tl = build_timeline(ward, augmentation(0, 5))
    assert counts_just_before(tl, 5) == (1, 1, 0)
    assert counts_just_before(tl, 5, COLONIZATION, 1) == (1, 0, 0)
    assert tl.on_ward_counts[0].tolist() == [1.0, 0.0, 0.0]


def test_counts_just_before_domain():
    ward = WardData(ward_id="M1", T_E=10, episodes=(episode("A#1", 0, 10),))
    tl = build_timeline(ward, augmentation(math.inf))
    with pytest.raises(ValidationException):
        counts_just_before(tl, 0)
    with pytest.raises(ValidationException):
        counts_just_before(tl, 10.5)
    assert counts_just_before(tl, 10) == (1, 0, 0)


def test_integrate_hazard_full():
    """S≡1, C≡1 于 [0,2]，β=(0.01,0.02,0) → 0.06"""
    ward = WardData(ward_id="M1", T_E=2, episodes=(
        episode("A#1", 0, 2),
        episode("B#1", 0, 2, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
    ))
    tl = build_timeline(ward, augmentation(math.inf, 0))
    theta = Theta(p=0.5, phi=0.1, beta0=0.01, beta1=0.02, beta2=0.0)
    assert integrate_hazard(tl, theta) == pytest.approx(0.06, abs=1e-12)


def test_integrate_hazard_nonlinear_uses_presence():
    ward = WardData(ward_id="M1", T_E=2, episodes=(
        episode("A#1", 0, 2),
        episode("B#1", 0, 2, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("C#1", 0, 2, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
    ))
    tl = build_timeline(ward, augmentation(math.inf, 0, 0))
    full = Theta(p=0.5, phi=0.1, beta0=0.01, beta1=0.02, beta2=0.0)
    nonlinear = full.model_copy(update={"model_kind": ModelKind.NON_LINEAR})
    assert integrate_hazard(tl, full) == pytest.approx(2 * (0.01 + 0.02 * 2))
    assert integrate_hazard(tl, nonlinear) == pytest.approx(2 * (0.01 + 0.02))


def test_hazard_exposures_match_integral():
    ward = WardData(ward_id="M1", T_E=12, episodes=(
        episode("A#1", 0, 12, precautions=[(3, 12)]),
        episode("B#1", 1, 9),
        episode("C#1", 2, 11),
    ))
    tl = build_timeline(ward, augmentation(0, 6, math.inf))
    theta = Theta(p=0.8, phi=0.1, beta0=0.003, beta1=0.02, beta2=0.007)
    exposures = hazard_exposures(tl, get_model(ModelKind.FULL))
    assert float(exposures @ theta.betas) == pytest.approx(integrate_hazard(tl, theta), rel=1e-12)


def test_empty_ward_timeline():
    ward = WardData(ward_id="M1", T_E=5, episodes=())
    tl = build_timeline(ward, augmentation())
    assert tl.times.tolist() == [0.0, 5.0]
    assert integrate_hazard(tl, Theta(p=0.5, phi=0.5, beta0=1, beta1=1, beta2=1)) == 0.0


def interval_count(starts, ends, t):
    """t 时刻覆盖它的半开区间 [start, end) 的个数"""
    starts = np.sort(np.asarray(starts, dtype=float))
    ends = np.sort(np.asarray(ends, dtype=float))
    return np.searchsorted(starts, t, side="right") - np.searchsorted(ends, t, side="right")


def brute_force_counts(ward, c, t):
    """直接由住院段、定植时间与隔离区间数出 t 时刻的 (S, C, Q)，不经过时间线"""
    a = np.array([e.a for e in ward.episodes], dtype=float)
    d = np.array([e.d for e in ward.episodes], dtype=float)
    colonized = np.isfinite(c)
    S = interval_count(a, np.minimum(d, c), t)
    present_colonized = interval_count(c[colonized], d[colonized], t)
    q_starts, q_ends = [], []
    for j, e in enumerate(ward.episodes):
        if not colonized[j]:
            continue
        for start, end in e.precautions:
            lo, hi = max(start, c[j]), min(end, e.d)
            if lo < hi:
                q_starts.append(lo)
                q_ends.append(hi)
    Q = interval_count(q_starts, q_ends, t)
    return S, present_colonized - Q, Q


def brute_force_rate(theta, C, Q):
    if theta.model_kind == ModelKind.NON_LINEAR:
        return theta.beta0 + theta.beta1 * (C >= 1) + theta.beta2 * (Q >= 1)
    return theta.beta0 + theta.beta1 * C + theta.beta2 * Q


def event_times(ward, c):
    times = [e.a for e in ward.episodes] + [e.d for e in ward.episodes]
    times += [float(x) for x in c if np.isfinite(x)]
    times += [bound for e in ward.episodes for interval in e.precautions for bound in interval]
    return np.unique(np.array(times, dtype=float))


@pytest.fixture(scope="module")
def synthetic():
    theta = default_theta().model_copy(update={"beta1": 0.05})
    return generate_synthetic_ward(SyntheticWardConfig(study_days=120, theta=theta, seed=3))


@pytest.fixture
def tied_ward():
    """整数时刻上同时发生入院、出院、定植与隔离"""
    ward = WardData(ward_id="M1", T_E=20, episodes=(
        episode("A#1", 0, 10, tests=[(2, True)], precautions=[(4, 10)]),
        episode("B#1", 2, 15, tests=[(9, True)], precautions=[(10, 15)]),
        episode("C#1", 4, 20, tests=[(12, True)]),
        episode("D#1", 10, 20, precautions=[(12, 16)]),
        episode("E#1", 10, 18),
    ))
    return ward, augmentation(0, 4, 10, 12.5, math.inf)


@pytest.mark.parametrize("kind", [ModelKind.FULL, ModelKind.NON_LINEAR])
def test_integrate_hazard_matches_riemann_sums(synthetic, tied_ward, kind):
    """精确积分 = 事件分划上的黎曼和；细网格中点和在离散化误差内一致"""
    theta = Theta(p=0.8, phi=0.1, beta0=0.004, beta1=0.03, beta2=0.01, model_kind=kind)
    for ward, aug in ((synthetic.ward, synthetic.augmentation), tied_ward):
        c = aug.colonization_times
        exact = integrate_hazard(build_timeline(ward, aug), theta)

        breaks = np.union1d(event_times(ward, c), [0.0, ward.T_E])
        mid = 0.5 * (breaks[:-1] + breaks[1:])
        S, C, Q = brute_force_counts(ward, c, mid)
        partition_sum = float(np.sum(np.diff(breaks) * S * brute_force_rate(theta, C, Q)))
        assert exact == pytest.approx(partition_sum, rel=1e-10)

        n = 1_000_000
        h = ward.T_E / n
        grid = (np.arange(n) + 0.5) * h
        S, C, Q = brute_force_counts(ward, c, grid)
        riemann = float(np.sum(h * S * brute_force_rate(theta, C, Q)))
        assert exact == pytest.approx(riemann, rel=1e-3)


def test_counts_just_before_matches_epsilon_replay(synthetic, tied_ward):
    """左极限 = 在 t−ε 处直接数出的 (S, C, Q)；对事件时刻与随机时刻都成立"""
    eps = 1e-7
    rng = np.random.default_rng(4)
    for ward, aug in ((synthetic.ward, synthetic.augmentation), tied_ward):
        c = aug.colonization_times
        tl = build_timeline(ward, aug)
        times = event_times(ward, c)
        times = np.concatenate([times[times > 0], rng.uniform(eps, ward.T_E, size=200)])
        for t in times:
            expected = tuple(int(x) for x in brute_force_counts(ward, c, t - eps))
            assert counts_just_before(tl, float(t)) == expected, t


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
