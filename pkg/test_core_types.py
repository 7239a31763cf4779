#!/usr/bin/env python3
"""
核心领域类型测试
使用方法: python3 test_core_types.py
"""
import math
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.core.types import (
    AdmissionClass,
    Augmentation,
    PatientEpisode,
    SwabResult,
    Theta,
    WardData,
    classify_admissions,
    compile_ward,
    make_episode_id,
)
from app.exceptions import ValidationException


def episode(episode_id, a, d, tests=(), precautions=(), person_id=None, admission_class=AdmissionClass.NEW_ADMISSION):
    return PatientEpisode(
        episode_id=episode_id,
        person_id=person_id or episode_id.split("#")[0],
        a=a,
        d=d,
        tests=tuple(SwabResult(time=t, positive=positive) for t, positive in tests),
        precautions=tuple(precautions),
        admission_class=admission_class,
    )


def test_readmission_within_window():
    """阳性后 40 天再入院：再入院定植"""
    stays = [
        episode("P1#1", 5, 12, tests=[(10, True)]),
        episode("P1#2", 50, 60),
    ]
    assert classify_admissions(stays, 180) == [
        AdmissionClass.NEW_ADMISSION,
        AdmissionClass.COLONIZED_ON_READMISSION,
    ]


def test_readmission_outside_window():
    """阳性后 190 天再入院：新入院"""
    stays = [
        episode("P1#1", 5, 12, tests=[(10, True)]),
        episode("P1#2", 200, 210),
    ]
    assert classify_admissions(stays, 180)[1] == AdmissionClass.NEW_ADMISSION


def test_readmission_without_prior_positive():
    stays = [episode("P1#1", 0, 5, tests=[(2, False)]), episode("P1#2", 20, 25)]
    assert classify_admissions(stays, 180) == [AdmissionClass.NEW_ADMISSION] * 2


def test_classification_ignores_input_order():
    stays = [episode("P1#2", 50, 60), episode("P1#1", 5, 12, tests=[(10, True)])]
    assert classify_admissions(stays, 180)[0] == AdmissionClass.COLONIZED_ON_READMISSION


def test_overlapping_stays_rejected():
    stays = [episode("P1#1", 0, 10), episode("P1#2", 5, 15)]
    with pytest.raises(ValidationException):
        classify_admissions(stays, 180)


def test_episode_invariants():
    with pytest.raises(ValidationError):
        episode("A#1", 5, 5)
    with pytest.raises(ValidationError):
        episode("A#1", 0, 10, tests=[(11, False)])
    with pytest.raises(ValidationError):
        episode("A#1", 0, 10, tests=[(4, False), (2, False)])
    with pytest.raises(ValidationError):
        episode("A#1", 0, 10, precautions=[(2, 6), (5, 8)])


def test_episode_derived_times():
    e = episode("A#1", 0, 10, tests=[(1, False), (3, True), (6, True)], precautions=[(4, 10)])
    assert e.first_positive == 3
    assert e.first_precaution == 4
    assert e.positive_times == [3, 6]
    assert e.is_isolated_at(4) and not e.is_isolated_at(3.9)
    assert episode("B#1", 0, 10).first_positive == math.inf


def test_ward_counts_and_occupancy():
    ward = WardData(ward_id="M1", T_E=20, episodes=(
        episode("A#1", 0, 10),
        episode("B#1", 2, 5, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("C#1", 4, 12),
    ))
    assert ward.n_new_admissions + ward.n_readmissions == ward.n_episodes
    assert ward.n_readmissions == 1
    assert ward.occupancy(4.5) == 3
    assert ward.occupancy(5) == 2
    assert ward.max_occupancy() == 3


def test_ward_rejects_episode_outside_window():
    with pytest.raises(ValidationError):
        WardData(ward_id="M1", T_E=5, episodes=(episode("A#1", 0, 10),))


def test_ward_rejects_duplicate_ids():
    with pytest.raises(ValidationError):
        WardData(ward_id="M1", T_E=20, episodes=(episode("A#1", 0, 10), episode("A#1", 11, 12)))


def test_theta_bounds():
    with pytest.raises(ValidationError):
        Theta(p=1.5, phi=0.1, beta0=0, beta1=0, beta2=0)
    with pytest.raises(ValidationError):
        Theta(p=0.5, phi=0.1, beta0=-0.001, beta1=0, beta2=0)
    theta = Theta(p=0.5, phi=0.1, beta0=0.1, beta1=0.2, beta2=0.3)
    assert theta.betas.tolist() == [0.1, 0.2, 0.3]
    assert theta.with_beta(1, 0.5).beta1 == 0.5


def test_initial_augmentation_and_partition():
    ward = WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#1", 0, 10, tests=[(2, False), (4, True)]),
        episode("B#1", 1, 8, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("C#1", 3, 9, tests=[(5, False)]),
    ))
    aug = Augmentation.initial(ward)
    assert aug.colonization_times[0] == 4
    assert aug.colonization_times[1] == 1
    assert aug.colonization_times[2] == math.inf
    aug.validate_against(ward)

    partition = aug.partition(ward)
    assert partition.positive == (0,)
    assert partition.readmission == (1,)
    assert partition.uncolonized_negative == (2,)
    assert partition.colonized_negative == ()


def test_augmentation_invariants():
    ward = WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#1", 0, 10, tests=[(4, True)]),
        episode("B#1", 1, 8, admission_class=AdmissionClass.COLONIZED_ON_READMISSION),
        episode("C#1", 3, 9),
    ))
    with pytest.raises(ValidationException):
        Augmentation(colonization_times=np.array([5.0, 1.0, math.inf])).validate_against(ward)
    with pytest.raises(ValidationException):
        Augmentation(colonization_times=np.array([4.0, 2.0, math.inf])).validate_against(ward)
    with pytest.raises(ValidationException):
        Augmentation(colonization_times=np.array([4.0, 1.0, 9.5])).validate_against(ward)
    with pytest.raises(ValidationException):
        Augmentation(colonization_times=np.array([4.0, 1.0])).validate_against(ward)
    Augmentation(colonization_times=np.array([0.0, 1.0, 9.0])).validate_against(ward)


def test_from_mapping_keeps_initial_values():
    ward = WardData(ward_id="M1", T_E=30, episodes=(
        episode("A#1", 0, 10, tests=[(4, True)]),
        episode("C#1", 3, 9),
    ))
    aug = Augmentation.from_mapping(ward, {"C#1": 5.0})
    assert aug.colonization_times.tolist() == [4.0, 5.0]


def test_false_negatives_after_colonization():
    """c=4，阴性检测在 2 与 6：只有 6 计入"""
    ward = WardData(ward_id="M1", T_E=10, episodes=(episode("A#1", 0, 10, tests=[(2, False), (6, False)]),))
    arrays = compile_ward(ward)
    assert arrays.false_negatives(0, 4.0) == 1
    assert arrays.false_negatives(0, 6.0) == 1
    assert arrays.false_negatives(0, 1.0) == 2
    assert arrays.false_negatives(0, math.inf) == 0


def test_compile_ward_is_cached_per_object():
    ward = WardData(ward_id="M1", T_E=10, episodes=(episode("A#1", 0, 10),))
    assert compile_ward(ward) is compile_ward(ward)


def test_episode_id_format():
    assert make_episode_id("P7", 2) == "P7#2"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
