"""
输出文件写入工具

所有机器可读输出都先写入目标目录下的临时文件，再原子替换。
"""
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd


PathLike = Union[str, Path]


def _atomic_replace(path: Path, write) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            write(handle)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_text_atomic(path: PathLike, text: str) -> Path:
    """原子写入文本（UTF-8）"""
    return _atomic_replace(Path(path), lambda handle: handle.write(text.encode("utf-8")))


def write_json_atomic(path: PathLike, payload: Any) -> Path:
    """原子写入 JSON（键排序，保证同样的内容得到同样的字节）"""
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
    return write_text_atomic(path, text + "\n")


def write_csv_atomic(path: PathLike, frame: pd.DataFrame) -> Path:
    """原子写入 CSV（不含索引列）"""
    return write_text_atomic(path, frame.to_csv(index=False, lineterminator="\n"))


def save_npy_atomic(path: PathLike, array: np.ndarray) -> Path:
    """原子写入 .npy 数组"""
    return _atomic_replace(Path(path), lambda handle: np.save(handle, array, allow_pickle=False))


def read_json(path: PathLike) -> Any:
    """读取 JSON 文件"""
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
