"""
输入文件解析

三个 UTF-8、逗号分隔、带表头的 CSV：
    admissions.csv   person_id,ward_id,admit_date,discharge_date
    tests.csv        person_id,ward_id,date,result        (result ∈ {pos, neg})
    precautions.csv  person_id,ward_id,start_date,end_date (end 不含)
日期为 ISO-8601（YYYY-MM-DD）。行号从 2 开始计（第 1 行为表头）。
"""
from io import StringIO
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.exceptions import IngestException
from app.utils.logger import logger


Source = Union[str, Path, IO[str]]

ADMISSION_COLUMNS = ["person_id", "ward_id", "admit_date", "discharge_date"]
TEST_COLUMNS = ["person_id", "ward_id", "date", "result"]
PRECAUTION_COLUMNS = ["person_id", "ward_id", "start_date", "end_date"]
RESULT_CODES = {"pos": True, "neg": False}
DATE_FORMAT = "%Y-%m-%d"


class RawEventTable(BaseModel):
    """
    解析后的三张表

    admissions: person_id, ward_id, admit, discharge, row
    tests: person_id, ward_id, date, positive, row
    precautions: person_id, ward_id, start, end, row
    日期列为 pandas Timestamp；row 为源文件中的行号。
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    admissions: pd.DataFrame
    tests: pd.DataFrame
    precautions: pd.DataFrame
    admissions_source: str = "admissions.csv"
    tests_source: str = "tests.csv"
    precautions_source: str = "precautions.csv"

    def ward_ids(self) -> List[str]:
        return sorted(self.admissions["ward_id"].unique().tolist())


def _source_name(source: Optional[Source], default: str) -> str:
    if isinstance(source, (str, Path)):
        return str(source)
    return default


def _read_table(source: Optional[Source], columns: Sequence[str], name: str) -> pd.DataFrame:
    """读取一张表，所有列按字符串读入；source 为 None 时返回空表"""
    if source is None:
        return pd.DataFrame({column: pd.Series(dtype=str) for column in list(columns) + ["row"]})
    if isinstance(source, (str, Path)) and not Path(source).exists():
        raise IngestException("文件不存在", source=name)
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise IngestException("文件为空（缺少表头）", source=name)
    except pd.errors.ParserError as e:
        raise IngestException(f"CSV 格式错误: {e}", source=name)

    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise IngestException(f"缺少列: {', '.join(missing)}", source=name)
    frame = frame[list(columns)].copy()
    for column in columns:
        frame[column] = frame[column].str.strip()
    frame["row"] = range(2, len(frame) + 2)
    return frame.reset_index(drop=True)


def _parse_dates(frame: pd.DataFrame, column: str, name: str) -> pd.Series:
    parsed = pd.to_datetime(frame[column], format=DATE_FORMAT, errors="coerce")
    bad = parsed.isna()
    if bad.any():
        first = frame.index[bad][0]
        raise IngestException(
            f"无法解析的日期 {column}={frame.at[first, column]!r}（应为 YYYY-MM-DD）",
            source=name,
            row=int(frame.at[first, "row"]),
        )
    return parsed


def _check_identifiers(frame: pd.DataFrame, name: str) -> None:
    for column in ("person_id", "ward_id"):
        empty = frame[column] == ""
        if empty.any():
            row = int(frame.loc[empty, "row"].iloc[0])
            raise IngestException(f"{column} 为空", source=name, row=row)


def _check_covered(
    events: pd.DataFrame,
    date_column: str,
    admissions: pd.DataFrame,
    name: str,
    what: str,
) -> None:
    """每个事件日期都必须落在同一人、同一病房的某次住院 [admit, discharge] 内"""
    if events.empty:
        return
    merged = events[["person_id", "ward_id", date_column, "row"]].merge(
        admissions[["person_id", "ward_id", "admit", "discharge"]],
        on=["person_id", "ward_id"],
        how="left",
    )
    merged["covered"] = (merged["admit"] <= merged[date_column]) & (merged[date_column] <= merged["discharge"])
    covered = merged.groupby("row")["covered"].any()
    uncovered = covered[~covered]
    if len(uncovered):
        row = int(uncovered.index.min())
        event = events.loc[events["row"] == row].iloc[0]
        raise IngestException(
            f"{what}日期 {event[date_column].date()} 不在病人 {event['person_id']} "
            f"于病房 {event['ward_id']} 的任何住院期间内",
            source=name,
            row=row,
        )


def parse_ward_files(
    admissions_source: Source,
    tests_source: Optional[Source] = None,
    precautions_source: Optional[Source] = None,
) -> RawEventTable:
    """
    解析三张输入表

    Args:
        admissions_source: 入出院表（路径或文本流）
        tests_source: 检测表（None 表示没有检测）
        precautions_source: 隔离表（None 表示没有隔离记录）

    Returns:
        带类型的原始事件表

    Raises:
        IngestException: 日期无法解析、结果代码未知、出院早于入院、事件不在任何住院期间内
    """
    admissions_name = _source_name(admissions_source, "admissions.csv")
    tests_name = _source_name(tests_source, "tests.csv")
    precautions_name = _source_name(precautions_source, "precautions.csv")

    admissions = _read_table(admissions_source, ADMISSION_COLUMNS, admissions_name)
    tests = _read_table(tests_source, TEST_COLUMNS, tests_name)
    precautions = _read_table(precautions_source, PRECAUTION_COLUMNS, precautions_name)

    _check_identifiers(admissions, admissions_name)
    admissions["admit"] = _parse_dates(admissions, "admit_date", admissions_name)
    admissions["discharge"] = _parse_dates(admissions, "discharge_date", admissions_name)
    backwards = admissions["discharge"] < admissions["admit"]
    if backwards.any():
        row = int(admissions.loc[backwards, "row"].iloc[0])
        raise IngestException("出院日期早于入院日期", source=admissions_name, row=row)

    _check_identifiers(tests, tests_name)
    tests["date"] = _parse_dates(tests, "date", tests_name) if len(tests) else pd.Series(dtype="datetime64[ns]")
    codes = tests["result"].str.lower()
    unknown = ~codes.isin(list(RESULT_CODES))
    if unknown.any():
        first = tests.index[unknown][0]
        raise IngestException(
            f"未知的检测结果代码 {tests.at[first, 'result']!r}（可选: pos, neg）",
            source=tests_name,
            row=int(tests.at[first, "row"]),
        )
    tests["positive"] = codes.map(RESULT_CODES).astype(bool)

    _check_identifiers(precautions, precautions_name)
    if len(precautions):
        precautions["start"] = _parse_dates(precautions, "start_date", precautions_name)
        precautions["end"] = _parse_dates(precautions, "end_date", precautions_name)
    else:
        precautions["start"] = pd.Series(dtype="datetime64[ns]")
        precautions["end"] = pd.Series(dtype="datetime64[ns]")
    backwards = precautions["end"] < precautions["start"]
    if backwards.any():
        row = int(precautions.loc[backwards, "row"].iloc[0])
        raise IngestException("隔离结束日期早于开始日期", source=precautions_name, row=row)

    _check_covered(tests, "date", admissions, tests_name, "检测")
    _check_covered(precautions, "start", admissions, precautions_name, "隔离开始")

    logger.debug(
        f"解析完成: {len(admissions)} 条入院, {len(tests)} 条检测, {len(precautions)} 条隔离"
    )
    return RawEventTable(
        admissions=admissions[["person_id", "ward_id", "admit", "discharge", "row"]],
        tests=tests[["person_id", "ward_id", "date", "positive", "row"]],
        precautions=precautions[["person_id", "ward_id", "start", "end", "row"]],
        admissions_source=admissions_name,
        tests_source=tests_name,
        precautions_source=precautions_name,
    )


def parse_ward_text(admissions: str, tests: str = "", precautions: str = "") -> RawEventTable:
    """由 CSV 文本解析（空字符串表示没有该表）"""
    return parse_ward_files(
        StringIO(admissions),
        StringIO(tests) if tests else None,
        StringIO(precautions) if precautions else None,
    )
