#!/usr/bin/env python3
"""
输入解析与 WardData 构建测试
使用方法: python3 test_ingest.py
"""
import os
import sys

import pytest

# 添加项目根目录到路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.core.types import AdmissionClass
from app.exceptions import EXIT_VALIDATION_ERROR, IngestException, ValidationException
from app.ingest.builder import build_ward_data, build_wards, load_wards, serialize_ward_data
from app.ingest.parser import parse_ward_files, parse_ward_text

ADMISSIONS_HEADER = "person_id,ward_id,admit_date,discharge_date\n"
TESTS_HEADER = "person_id,ward_id,date,result\n"
PRECAUTIONS_HEADER = "person_id,ward_id,start_date,end_date\n"


def test_single_row_episode_length():
    """P1,M1,2006-01-03,2006-01-07 → 住院 4 天"""
    raw = parse_ward_text(ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\n")
    ward = build_ward_data(raw, "2006-01-01", "2006-03-01")
    (episode,) = ward.episodes
    assert episode.d - episode.a == 4
    assert episode.a == 2
    assert episode.episode_id == "P1#1"


def test_empty_tests_is_valid():
    raw = parse_ward_text(ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\n", TESTS_HEADER)
    ward = build_ward_data(raw, "2006-01-01", "2006-03-01")
    assert ward.episodes[0].tests == ()


def test_test_outside_admission_names_row():
    tests = TESTS_HEADER + "P1,M1,2006-01-04,neg\nP1,M1,2006-02-10,pos\n"
    with pytest.raises(IngestException) as excinfo:
        parse_ward_text(ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\n", tests)
    assert excinfo.value.row == 3
    assert excinfo.value.exit_code == EXIT_VALIDATION_ERROR


@pytest.mark.parametrize("admissions, tests, row", [
    (ADMISSIONS_HEADER + "P1,M1,2006-13-03,2006-01-07\n", "", 2),
    (ADMISSIONS_HEADER + "P1,M1,2006-01-09,2006-01-07\n", "", 2),
    (ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\n", TESTS_HEADER + "P1,M1,2006-01-04,maybe\n", 2),
    (ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\n,M1,2006-01-03,2006-01-07\n", "", 3),
])
def test_malformed_rows(admissions, tests, row):
    with pytest.raises(IngestException) as excinfo:
        parse_ward_text(admissions, tests)
    assert excinfo.value.row == row


def test_missing_column():
    with pytest.raises(IngestException):
        parse_ward_text("person_id,ward_id,admit_date\nP1,M1,2006-01-03\n")


def test_missing_file(tmp_path):
    with pytest.raises(IngestException) as excinfo:
        parse_ward_files(tmp_path / "admissions.csv")
    assert "admissions.csv" in excinfo.value.detail


def test_load_wards_sees_rewritten_file(tmp_path):
    """同一进程内改写输入文件后，load_wards 不返回旧的缓存结果"""
    admissions = tmp_path / "admissions.csv"
    admissions.write_text(ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\n", encoding="utf-8")
    first = load_wards(str(admissions), None, None, "2006-01-01", "2006-03-01")
    assert first["M1"].n_episodes == 1

    admissions.write_text(
        ADMISSIONS_HEADER + "P1,M1,2006-01-03,2006-01-07\nP2,M1,2006-01-04,2006-01-09\n", encoding="utf-8"
    )
    second = load_wards(str(admissions), None, None, "2006-01-01", "2006-03-01")
    assert second["M1"].n_episodes == 2


def test_truncation_to_study_window():
    """研究开始前 5 天入院、第 3 天出院 → [0, 3]；研究结束仍在院 → d = T_E"""
    admissions = ADMISSIONS_HEADER + "P1,M1,2005-12-27,2006-01-04\nP2,M1,2006-01-20,2006-03-15\n"
    tests = TESTS_HEADER + "P1,M1,2005-12-28,neg\nP1,M1,2006-01-02,pos\nP2,M1,2006-03-10,pos\n"
    raw = parse_ward_text(admissions, tests)
    ward = build_ward_data(raw, "2006-01-01", "2006-03-01")
    first, second = ward.episodes
    assert (first.a, first.d) == (0.0, 3.0)
    assert [swab.time for swab in first.tests] == [1.0]
    assert second.d == ward.T_E == 59.0
    assert second.tests == ()


def test_readmission_classification():
    """阳性后 40 天再次入院 → 再入院定植"""
    admissions = ADMISSIONS_HEADER + "P1,M1,2006-01-05,2006-01-12\nP1,M1,2006-02-20,2006-02-25\n"
    tests = TESTS_HEADER + "P1,M1,2006-01-11,pos\n"
    ward = build_ward_data(parse_ward_text(admissions, tests), "2006-01-01", "2006-06-01")
    assert [e.admission_class for e in ward.episodes] == [
        AdmissionClass.NEW_ADMISSION,
        AdmissionClass.COLONIZED_ON_READMISSION,
    ]
    assert [e.episode_id for e in ward.episodes] == ["P1#1", "P1#2"]


def test_readmission_uses_pre_window_positives():
    """研究开始前的阳性仍决定研究期间的再入院分类"""
    admissions = ADMISSIONS_HEADER + "P1,M1,2005-12-01,2005-12-10\nP1,M1,2006-01-10,2006-01-15\n"
    tests = TESTS_HEADER + "P1,M1,2005-12-05,pos\n"
    ward = build_ward_data(parse_ward_text(admissions, tests), "2006-01-01", "2006-06-01")
    (episode,) = ward.episodes
    assert episode.admission_class == AdmissionClass.COLONIZED_ON_READMISSION


def test_row_order_independence():
    rows = [
        "P2,M1,2006-01-05,2006-01-20",
        "P1,M1,2006-01-02,2006-01-09",
        "P3,M1,2006-01-04,2006-01-06",
        "P1,M1,2006-01-15,2006-01-18",
    ]
    tests = TESTS_HEADER + "P1,M1,2006-01-08,pos\nP2,M1,2006-01-10,neg\n"
    forward = build_ward_data(parse_ward_text(ADMISSIONS_HEADER + "\n".join(rows) + "\n", tests), "2006-01-01", "2006-02-01")
    backward = build_ward_data(
        parse_ward_text(ADMISSIONS_HEADER + "\n".join(reversed(rows)) + "\n", tests), "2006-01-01", "2006-02-01"
    )
    assert forward == backward
    assert [e.a for e in forward.episodes] == sorted(e.a for e in forward.episodes)


def test_precautions_clipped_and_merged():
    admissions = ADMISSIONS_HEADER + "P1,M1,2006-01-02,2006-01-12\n"
    precautions = PRECAUTIONS_HEADER + "P1,M1,2006-01-04,2006-01-07\nP1,M1,2006-01-06,2006-01-20\n"
    ward = build_ward_data(parse_ward_text(admissions, "", precautions), "2006-01-01", "2006-02-01")
    assert ward.episodes[0].precautions == ((3.0, 11.0),)


def test_multiple_wards_require_ward_id():
    admissions = ADMISSIONS_HEADER + "P1,M1,2006-01-02,2006-01-05\nP2,M2,2006-01-02,2006-01-05\n"
    raw = parse_ward_text(admissions)
    with pytest.raises(ValidationException):
        build_ward_data(raw, "2006-01-01", "2006-02-01")
    wards = build_wards(raw, "2006-01-01", "2006-02-01")
    assert sorted(wards) == ["M1", "M2"]
    with pytest.raises(ValidationException):
        build_ward_data(raw, "2006-01-01", "2006-02-01", ward_id="M9")


def test_invalid_study_window():
    raw = parse_ward_text(ADMISSIONS_HEADER + "P1,M1,2006-01-02,2006-01-05\n")
    with pytest.raises(ValidationException):
        build_ward_data(raw, "2006-02-01", "2006-01-01")


def test_bed_capacity_is_only_a_warning():
    admissions = ADMISSIONS_HEADER + "P1,M1,2006-01-02,2006-01-05\nP2,M1,2006-01-02,2006-01-05\n"
    ward = build_ward_data(parse_ward_text(admissions), "2006-01-01", "2006-02-01", bed_capacity=1)
    assert ward.max_occupancy() == 2


def test_serialize_roundtrip(tmp_path):
    admissions = ADMISSIONS_HEADER + (
        "P1,M1,2006-01-02,2006-01-09\n"
        "P1,M1,2006-01-20,2006-01-28\n"
        "P2,M1,2006-01-03,2006-01-15\n"
        "P3,M2,2006-01-05,2006-01-08\n"
    )
    tests = TESTS_HEADER + "P1,M1,2006-01-05,neg\nP1,M1,2006-01-08,pos\nP2,M1,2006-01-10,neg\n"
    precautions = PRECAUTIONS_HEADER + "P1,M1,2006-01-08,2006-01-09\nP1,M1,2006-01-20,2006-01-28\n"
    wards = build_wards(parse_ward_text(admissions, tests, precautions), "2006-01-01", "2006-02-15")

    paths = serialize_ward_data(list(wards.values()), "2006-01-01", tmp_path)
    again = build_wards(
        parse_ward_files(paths["admissions"], paths["tests"], paths["precautions"]),
        "2006-01-01",
        "2006-02-15",
    )
    assert again == wards


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
