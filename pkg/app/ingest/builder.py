"""
由原始事件表构建 WardData，以及反向序列化
"""
import datetime as dt
import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import ValidationError

from app.core.types import (
    PatientEpisode,
    SwabResult,
    WardData,
    classify_admissions,
    make_episode_id,
)
from app.exceptions import IngestException, ValidationException
from app.ingest.parser import DATE_FORMAT, RawEventTable, parse_ward_files
from app.utils.cache import cached
from app.utils.io import write_csv_atomic
from app.utils.logger import logger


DateLike = Union[str, dt.date, pd.Timestamp]


def _to_timestamp(value: DateLike, name: str) -> pd.Timestamp:
    try:
        return pd.Timestamp(value).normalize()
    except (ValueError, TypeError):
        raise ValidationException(f"无法解析的{name}: {value!r}")


def _days(series: pd.Series, origin: pd.Timestamp) -> List[float]:
    return [float(v) for v in (series - origin).dt.days]


def _merge_intervals(intervals: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    merged: List[Tuple[float, float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _raw_episodes(raw: RawEventTable, ward_id: str, origin: pd.Timestamp) -> List[PatientEpisode]:
    """未截断的住院段（时间可为负），检测与隔离已分配到住院段"""
    admissions = raw.admissions[raw.admissions["ward_id"] == ward_id].copy()
    admissions["a"] = _days(admissions["admit"], origin)
    admissions["d"] = _days(admissions["discharge"], origin)
    # 当天入当天出视为住院一天
    same_day = admissions["d"] <= admissions["a"]
    admissions.loc[same_day, "d"] = admissions.loc[same_day, "a"] + 1

    tests = raw.tests[raw.tests["ward_id"] == ward_id].copy()
    tests["t"] = _days(tests["date"], origin)
    precautions = raw.precautions[raw.precautions["ward_id"] == ward_id].copy()
    precautions["s"] = _days(precautions["start"], origin)
    precautions["e"] = _days(precautions["end"], origin)

    episodes: List[PatientEpisode] = []
    for person_id, stays in admissions.groupby("person_id", sort=True):
        stays = stays.sort_values(["a", "d", "row"])
        person_tests = tests[tests["person_id"] == person_id]
        person_precautions = precautions[precautions["person_id"] == person_id]
        spans = list(zip(stays["a"], stays["d"], stays["row"]))

        def owner(t: float) -> Optional[int]:
            # 出院日与再入院日重合时，归属较晚的住院段
            found = None
            for k, (a, d, _) in enumerate(spans):
                if a <= t <= d:
                    found = k
            return found

        swabs: Dict[int, List[SwabResult]] = {k: [] for k in range(len(spans))}
        for t, positive in zip(person_tests["t"], person_tests["positive"]):
            k = owner(t)
            if k is not None:
                swabs[k].append(SwabResult(time=t, positive=bool(positive)))
        isolation: Dict[int, List[Tuple[float, float]]] = {k: [] for k in range(len(spans))}
        for s, e in zip(person_precautions["s"], person_precautions["e"]):
            k = owner(s)
            if k is None:
                continue
            a, d, _ = spans[k]
            s, e = max(s, a), min(e, d)
            if s < e:
                isolation[k].append((s, e))

        for k, (a, d, row) in enumerate(spans):
            try:
                episodes.append(PatientEpisode(
                    episode_id=make_episode_id(str(person_id), k + 1),
                    person_id=str(person_id),
                    a=a,
                    d=d,
                    tests=tuple(sorted(swabs[k], key=lambda r: (r.time, r.positive))),
                    precautions=tuple(_merge_intervals(isolation[k])),
                ))
            except ValidationError as e:
                raise IngestException(str(e.errors()[0]["msg"]), source=raw.admissions_source, row=int(row))
    return episodes


def _truncate(episode: PatientEpisode, T_E: float) -> Optional[PatientEpisode]:
    """截断到 [0, T_E]；完全落在窗口外的住院段返回 None"""
    a, d = max(episode.a, 0.0), min(episode.d, T_E)
    if a >= d:
        return None
    tests = tuple(r for r in episode.tests if a <= r.time <= d)
    precautions = tuple(
        (max(s, a), min(e, d)) for s, e in episode.precautions if max(s, a) < min(e, d)
    )
    return episode.model_copy(update={"a": a, "d": d, "tests": tests, "precautions": precautions})


def build_ward_data(
    raw: RawEventTable,
    study_start: DateLike,
    study_end: DateLike,
    readmission_window: float = 180.0,
    ward_id: Optional[str] = None,
    bed_capacity: Optional[int] = None,
) -> WardData:
    """
    构建一个病房的 WardData

    时间换算为距研究开始的天数；先在未截断的数据上判定再入院，再截断到 [0, T_E]。

    Args:
        raw: 原始事件表
        study_start: 研究开始日期 T_S
        study_end: 研究结束日期 T_E
        readmission_window: 再入院携带窗口（天）
        ward_id: 病房编号（表中只有一个病房时可省略）
        bed_capacity: 床位数（仅用于告警）

    Returns:
        按入院时间排序的病房数据

    Raises:
        ValidationException: 研究窗口无效、病房不存在或没有任何住院段
    """
    origin = _to_timestamp(study_start, "研究开始日期")
    end = _to_timestamp(study_end, "研究结束日期")
    T_E = float((end - origin).days)
    if T_E <= 0:
        raise ValidationException(f"研究结束日期 {end.date()} 必须晚于开始日期 {origin.date()}")

    ward_ids = raw.ward_ids()
    if ward_id is None:
        if len(ward_ids) != 1:
            raise ValidationException(f"输入包含多个病房，必须指定 ward_id: {', '.join(ward_ids)}")
        ward_id = ward_ids[0]
    elif ward_id not in ward_ids:
        raise ValidationException(f"输入中没有病房 {ward_id}")

    episodes = _raw_episodes(raw, ward_id, origin)
    classes = classify_admissions(episodes, readmission_window)
    kept: List[PatientEpisode] = []
    for episode, admission_class in zip(episodes, classes):
        truncated = _truncate(episode.model_copy(update={"admission_class": admission_class}), T_E)
        if truncated is not None:
            kept.append(truncated)
    if not kept:
        raise ValidationException(f"病房 {ward_id} 在研究窗口内没有任何住院段")
    kept.sort(key=lambda e: (e.a, e.d, e.episode_id))

    ward = WardData(ward_id=ward_id, T_E=T_E, episodes=tuple(kept), readmission_window=readmission_window)
    if bed_capacity is not None:
        peak = ward.max_occupancy()
        if peak > bed_capacity:
            logger.warning(f"病房 {ward_id} 的最大在院人数 {peak} 超过床位数 {bed_capacity}")
    logger.info(
        f"病房 {ward_id}: {ward.n_episodes} 个住院段 "
        f"(新入院 {ward.n_new_admissions}, 再入院定植 {ward.n_readmissions}), T_E={T_E:g} 天"
    )
    return ward


def build_wards(
    raw: RawEventTable,
    study_start: DateLike,
    study_end: DateLike,
    readmission_window: float = 180.0,
    bed_capacity: Optional[int] = None,
) -> Dict[str, WardData]:
    """构建表中的全部病房"""
    return {
        ward_id: build_ward_data(raw, study_start, study_end, readmission_window, ward_id, bed_capacity)
        for ward_id in raw.ward_ids()
    }


def _file_stamp(path: Optional[str]) -> Optional[Tuple[int, int]]:
    if path is None or not os.path.exists(path):
        return None
    info = os.stat(path)
    return info.st_mtime_ns, info.st_size


@cached
def _load_wards_cached(
    admissions: str,
    tests: Optional[str],
    precautions: Optional[str],
    study_start: str,
    study_end: str,
    readmission_window: float,
    bed_capacity: Optional[int],
    stamps: Tuple[Optional[Tuple[int, int]], ...],
) -> Dict[str, WardData]:
    raw = parse_ward_files(admissions, tests, precautions)
    return build_wards(raw, study_start, study_end, readmission_window, bed_capacity)


def load_wards(
    admissions: str,
    tests: Optional[str],
    precautions: Optional[str],
    study_start: str,
    study_end: str,
    readmission_window: float = 180.0,
    bed_capacity: Optional[int] = None,
) -> Dict[str, WardData]:
    """解析文件并构建全部病房（同一进程内按参数与文件的修改时间、大小缓存）"""
    stamps = tuple(_file_stamp(path) for path in (admissions, tests, precautions))
    return _load_wards_cached(
        admissions, tests, precautions, study_start, study_end, readmission_window, bed_capacity, stamps
    )


def _date(origin: pd.Timestamp, t: float) -> str:
    return (origin + pd.Timedelta(days=float(t))).strftime(DATE_FORMAT)


def ward_data_frames(ward: WardData, study_start: DateLike) -> Dict[str, pd.DataFrame]:
    """把 WardData 还原为三张表（时间须为整数天）"""
    origin = _to_timestamp(study_start, "研究开始日期")
    admissions, tests, precautions = [], [], []
    for episode in ward.episodes:
        admissions.append((episode.person_id, ward.ward_id, _date(origin, episode.a), _date(origin, episode.d)))
        for swab in episode.tests:
            tests.append((episode.person_id, ward.ward_id, _date(origin, swab.time), "pos" if swab.positive else "neg"))
        for start, end in episode.precautions:
            precautions.append((episode.person_id, ward.ward_id, _date(origin, start), _date(origin, end)))
    return {
        "admissions": pd.DataFrame(admissions, columns=["person_id", "ward_id", "admit_date", "discharge_date"]),
        "tests": pd.DataFrame(tests, columns=["person_id", "ward_id", "date", "result"]),
        "precautions": pd.DataFrame(precautions, columns=["person_id", "ward_id", "start_date", "end_date"]),
    }


def serialize_ward_data(
    wards: Union[WardData, List[WardData]],
    study_start: DateLike,
    directory: Union[str, Path],
) -> Dict[str, Path]:
    """
    写出 admissions.csv、tests.csv、precautions.csv

    多个病房写入同一组文件。再次解析并以相同的研究窗口构建，得到相同的 WardData。

    Returns:
        表名到文件路径的映射
    """
    if isinstance(wards, WardData):
        wards = [wards]
    directory = Path(directory)
    frames: Dict[str, List[pd.DataFrame]] = {"admissions": [], "tests": [], "precautions": []}
    for ward in wards:
        for name, frame in ward_data_frames(ward, study_start).items():
            frames[name].append(frame)
    paths = {}
    for name, parts in frames.items():
        paths[name] = write_csv_atomic(directory / f"{name}.csv", pd.concat(parts, ignore_index=True))
    return paths
