#!/usr/bin/env python3
"""
前向模拟与合成病房测试
使用方法: python3 test_simulate.py
"""
import math
import os
import sys
from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate, stats

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.core.likelihood import log_augmented_likelihood
from app.core.types import AdmissionClass, Augmentation, ModelKind, PatientEpisode, SwabResult, Theta, WardData
from app.mcmc.sampler import make_rng
from app.simulate.engine import (
    AdmissionFrame,
    detected_colonizations_by_interval,
    simulate_colonization,
    simulate_outcome,
    simulate_tests_given_augmentation,
)
from app.simulate.policy import PrecautionRule, ScreeningSchedule, SimPolicy
from app.simulate.synthetic import (
    SyntheticWardConfig,
    default_theta,
    format_summary_table,
    generate_synthetic_ward,
    read_truth,
    ward_summary_statistics,
    write_truth,
)

WEEKLY = SimPolicy(test_schedule=ScreeningSchedule.ADMISSION_PLUS_WEEKLY, compliance=1.0)


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


@pytest.fixture
def ward():
    return WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#1", 0, 12, tests=[(0, False), (7, False)]),
        episode("B#1", 2, 20, tests=[(2, False), (9, False), (16, False)]),
        episode("C#1", 5, 9, tests=[(5, False)]),
        episode("D#1", 10, 30, tests=[(10, False), (17, False), (24, False)]),
    ))


def test_no_transmission_no_importation(ward):
    """φ=0、β 全为 0 → 没有定植，检测全部阴性"""
    theta = Theta(p=0.9, phi=0.0, beta0=0.0, beta1=0.0, beta2=0.0)
    simulated, truth = simulate_colonization(ward, theta, SimPolicy(), make_rng(1))
    assert np.all(np.isinf(truth.colonization_times))
    assert all(not swab.positive for e in simulated.episodes for swab in e.tests)
    assert [len(e.tests) for e in simulated.episodes] == [2, 3, 1, 3]


def test_all_imported_perfect_sensitivity(ward):
    """φ=1、p=1、沿用观测检测 → 入院当天的检测全部阳性"""
    theta = Theta(p=1.0, phi=1.0, beta0=0.0, beta1=0.0, beta2=0.0)
    simulated, truth = simulate_colonization(ward, theta, SimPolicy(), make_rng(2))
    assert np.array_equal(truth.colonization_times, np.array([0.0, 2.0, 5.0, 10.0]))
    for e in simulated.episodes:
        assert e.tests[0].time == e.a and e.tests[0].positive
        # 首次阳性后 1 天开始隔离直到出院
        assert e.precautions == ((e.a + 1, e.d),)
    truth.validate_against(simulated)


def test_truncated_exponential_colonization_time():
    """单个病人，仅背景定植：定植时间为截断于出院的 Exp(β₀)"""
    beta0, stay = 0.1, 10.0
    single = WardData(ward_id="M1", T_E=stay, episodes=(episode("A#1", 0, stay),))
    frame = AdmissionFrame.from_ward(single)
    theta = Theta(p=0.5, phi=0.0, beta0=beta0, beta1=0.0, beta2=0.0)
    rng = make_rng(3)
    times = np.array([simulate_outcome(frame, theta, SimPolicy(), rng).colonization_times[0] for _ in range(5000)])
    colonized = times[np.isfinite(times)]

    q = math.exp(-beta0 * stay)
    assert colonized.size / times.size == pytest.approx(1 - q, abs=0.03)
    expected = 1 / beta0 - stay * q / (1 - q)
    variance = 1 / beta0 ** 2 - stay ** 2 * q / (1 - q) ** 2
    assert abs(colonized.mean() - expected) < 3 * math.sqrt(variance / colonized.size) + 1e-9


def test_weekly_screening_times():
    """每周检测：a + 7k < d"""
    single = WardData(ward_id="M1", T_E=30, episodes=(episode("A#1", 0, 15), episode("B#1", 1, 15)))
    theta = Theta(p=0.5, phi=0.0, beta0=0.0, beta1=0.0, beta2=0.0)
    simulated, _ = simulate_colonization(single, theta, WEEKLY, make_rng(4))
    assert [swab.time for swab in simulated.episodes[0].tests] == [0.0, 7.0, 14.0]
    assert [swab.time for swab in simulated.episodes[1].tests] == [1.0, 8.0]


def test_zero_compliance_means_no_tests():
    single = WardData(ward_id="M1", T_E=30, episodes=(episode("A#1", 0, 15),))
    policy = WEEKLY.model_copy(update={"compliance": 0.0})
    simulated, _ = simulate_colonization(single, default_theta(), policy, make_rng(5))
    assert simulated.episodes[0].tests == ()


def test_carried_in_readmission_kept():
    """研究窗口前的携带状态在模拟中保留"""
    readmitted = WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#2", 3, 10, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("B#1", 0, 20),
    ))
    theta = Theta(p=0.5, phi=0.0, beta0=0.0, beta1=0.0, beta2=0.0)
    simulated, truth = simulate_colonization(readmitted, theta, SimPolicy(), make_rng(6))
    assert simulated.episodes[0].is_readmission
    assert truth.colonization_times[0] == 3.0
    assert truth.colonization_times[1] == math.inf


def test_carried_in_status_follows_readmission_chain():
    """窗口前阳性使 A#2、A#3 都是再入院定植；E 的首段为新入院，其后的再入院按模拟阳性判定"""
    chained = WardData(ward_id="M1", T_E=60, episodes=(
        episode("A#2", 3, 10, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("A#3", 20, 28, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("E#1", 0, 5, tests=[(1, True)]),
        episode("E#2", 15, 25, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
    ))
    assert AdmissionFrame.from_ward(chained).carried_in.tolist() == [True, True, False, False]

    theta = Theta(p=0.0, phi=0.0, beta0=0.0, beta1=0.0, beta2=0.0)
    simulated, truth = simulate_colonization(chained, theta, SimPolicy(), make_rng(6))
    assert [e.is_readmission for e in simulated.episodes] == [True, True, False, False]
    assert truth.colonization_times.tolist() == [3.0, 20.0, math.inf, math.inf]


def test_readmission_derived_from_simulated_positives():
    stays = WardData(ward_id="M1", T_E=60, episodes=(
        episode("A#1", 0, 10, tests=[(0, False)]),
        episode("A#2", 30, 40),
    ))
    theta = Theta(p=1.0, phi=1.0, beta0=0.0, beta1=0.0, beta2=0.0)
    simulated, truth = simulate_colonization(stays, theta, SimPolicy(), make_rng(7))
    assert [e.admission_class for e in simulated.episodes] == [
        AdmissionClass.NEW_ADMISSION,
        AdmissionClass.COLONIZED_ON_READMISSION,
    ]
    truth.validate_against(simulated)


GOF_THETA = Theta(p=0.5, phi=0.3, beta0=0.05, beta1=0.15, beta2=0.04)
NEVER, ON_ADMISSION, ON_WARD = range(3)


def two_patient_ward():
    """A 在 [0,6] 住院、第 3 天起隔离；B 在 [2,10] 住院；均无检测"""
    return WardData(ward_id="M1", T_E=10, episodes=(
        episode("A#1", 0, 6, precautions=[(3, 6)]),
        episode("B#1", 2, 10),
    ))


def outcome_class(c, a):
    if not math.isfinite(c):
        return NEVER
    return ON_ADMISSION if c == a else ON_WARD


def class_probabilities(ward, theta):
    """对定植时间积分 exp(增广似然)，得到 (A 的类别, B 的类别) 的 9 个精确概率"""
    (a_A, d_A), (a_B, d_B) = [(e.a, e.d) for e in ward.episodes]

    def density(c_A, c_B):
        return math.exp(log_augmented_likelihood(ward, Augmentation(colonization_times=np.array([c_A, c_B])), theta))

    probabilities = {}
    for k_A in (NEVER, ON_ADMISSION, ON_WARD):
        for k_B in (NEVER, ON_ADMISSION, ON_WARD):
            c_A = math.inf if k_A == NEVER else a_A
            c_B = math.inf if k_B == NEVER else a_B
            if k_A != ON_WARD and k_B != ON_WARD:
                value = density(c_A, c_B)
            elif k_A == ON_WARD and k_B != ON_WARD:
                value = integrate.quad(lambda x: density(x, c_B), a_A, d_A, points=[2, 3], epsabs=1e-12)[0]
            elif k_B == ON_WARD and k_A != ON_WARD:
                value = integrate.quad(lambda y: density(c_A, y), a_B, d_B, points=[3, 6], epsabs=1e-12)[0]
            else:
                value = integrate.nquad(
                    lambda y, x: density(x, y),
                    [[a_B, d_B], [a_A, d_A]],
                    opts=[lambda x: {"points": [p for p in (x, 3.0, 6.0) if a_B < p < d_B]}, {"points": [2, 3]}],
                )[0]
            probabilities[k_A, k_B] = value
    return probabilities


def test_colonization_class_probabilities_sum_to_one():
    probabilities = class_probabilities(two_patient_ward(), GOF_THETA)
    assert sum(probabilities.values()) == pytest.approx(1.0, abs=1e-6)
    # 两人都入院即定植
    assert probabilities[ON_ADMISSION, ON_ADMISSION] == pytest.approx(0.3 ** 2, abs=1e-12)


def test_simulate_colonization_goodness_of_fit():
    """模拟的定植类别频率与似然积分得到的精确概率一致（χ² 检验）"""
    n = 20000
    ward = two_patient_ward()
    policy = SimPolicy(precaution_rule=PrecautionRule.REPLAY_OBSERVED)
    rng = make_rng(17)
    observed = Counter()
    for _ in range(n):
        _, truth = simulate_colonization(ward, GOF_THETA, policy, rng)
        c_A, c_B = truth.colonization_times
        observed[outcome_class(c_A, 0.0), outcome_class(c_B, 2.0)] += 1
    probabilities = class_probabilities(ward, GOF_THETA)
    keys = sorted(probabilities)
    expected = np.array([probabilities[key] for key in keys])
    counts = np.array([observed[key] for key in keys])
    assert counts.sum() == n
    assert stats.chisquare(counts, n * expected / expected.sum()).pvalue > 1e-3


def test_simulation_is_deterministic(ward):
    theta = default_theta().model_copy(update={"beta1": 0.05})
    first = simulate_colonization(ward, theta, SimPolicy(), make_rng(8))
    second = simulate_colonization(ward, theta, SimPolicy(), make_rng(8))
    assert first[0] == second[0]
    assert np.array_equal(first[1].colonization_times, second[1].colonization_times)


def test_tests_given_augmentation(ward):
    aug = Augmentation(colonization_times=np.array([7.0, math.inf, 5.0, 12.0]))
    resampled = simulate_tests_given_augmentation(ward, aug, 1.0, make_rng(9))
    results = [[swab.positive for swab in e.tests] for e in resampled.episodes]
    assert results == [[False, True], [False, False, False], [True], [False, True, True]]
    assert [e.a for e in resampled.episodes] == [e.a for e in ward.episodes]


def test_detected_counts_two_patients():
    """首次阳性在第 3 天与第 16 天 → [1, 1, 0]"""
    data = WardData(ward_id="M1", T_E=42, episodes=(
        episode("A#1", 0, 10, tests=[(3, True)]),
        episode("B#1", 10, 20, tests=[(12, False), (16, True)]),
    ))
    assert detected_colonizations_by_interval(data, 14).tolist() == [1, 1, 0]


def test_detected_counts_first_positive_only():
    data = WardData(ward_id="M1", T_E=42, episodes=(episode("A#1", 0, 20, tests=[(3, True), (16, True)]),))
    assert detected_colonizations_by_interval(data, 14).tolist() == [1, 0, 0]


def test_detected_counts_skip_readmissions():
    data = WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#1", 0, 10, tests=[(2, True)], admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("B#1", 0, 10, tests=[(5, False)]),
    ))
    counts = detected_colonizations_by_interval(data, 14)
    assert counts.tolist() == [0, 0, 0]
    assert counts.size == math.ceil(30 / 14)


def test_synthetic_ward_scale_and_determinism():
    config = SyntheticWardConfig(seed=42, spawn_key=(0,))
    first = generate_synthetic_ward(config)
    second = generate_synthetic_ward(config)
    assert first.ward == second.ward
    assert np.array_equal(first.augmentation.colonization_times, second.augmentation.colonization_times)
    assert 600 <= first.ward.n_episodes <= 1500
    assert first.ward.max_occupancy() <= config.beds
    first.augmentation.validate_against(first.ward)


def test_single_bed_nonlinear_matches_full():
    """单床位：C+Q ≤ 1，非线性与全模型似然相同"""
    config = SyntheticWardConfig(beds=1, study_days=120, seed=3)
    synthetic = generate_synthetic_ward(config)
    assert synthetic.ward.max_occupancy() <= 1
    full = synthetic.theta
    nonlinear = full.model_copy(update={"model_kind": ModelKind.NON_LINEAR})
    assert log_augmented_likelihood(synthetic.ward, synthetic.augmentation, full) == pytest.approx(
        log_augmented_likelihood(synthetic.ward, synthetic.augmentation, nonlinear), abs=1e-9
    )


def test_synthetic_policy_must_generate_tests():
    with pytest.raises(ValidationError):
        SyntheticWardConfig(policy=SimPolicy())
    with pytest.raises(ValidationError):
        SyntheticWardConfig(beds=0)


def test_readmissions_in_synthetic_ward():
    config = SyntheticWardConfig(study_days=200, readmission_probability=0.5, seed=11)
    synthetic = generate_synthetic_ward(config)
    persons = {e.person_id for e in synthetic.ward.episodes}
    assert len(persons) < synthetic.ward.n_episodes
    synthetic.augmentation.validate_against(synthetic.ward)


def test_truth_roundtrip(tmp_path):
    synthetic = generate_synthetic_ward(SyntheticWardConfig(study_days=60, seed=5, ward_id="SIM01"))
    path = write_truth(tmp_path / "truth.csv", [synthetic])
    restored = read_truth(path, synthetic.ward, "SIM01")
    assert np.array_equal(restored.colonization_times, synthetic.augmentation.colonization_times)


def test_summary_statistics():
    data = WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#1", 0, 4, tests=[(0, False), (3, True)], precautions=[(3, 4)]),
        episode("B#1", 2, 8, tests=[(2, False)]),
    ))
    summary = ward_summary_statistics(data)
    assert summary.n_episodes == 2
    assert summary.los_mean == 5.0
    assert summary.percent_precautions == 50.0
    assert summary.tests_mean == 1.5
    assert summary.positives_mean == 0.5
    assert "M1" in format_summary_table([summary])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
