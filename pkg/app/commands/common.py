"""
子命令共用的工具
"""
import math
from pathlib import Path
from typing import Any, Dict, Optional

from app.commands.run_config import RunConfig
from app.config import settings
from app.core.types import WardData
from app.exceptions import ConfigException
from app.ingest.builder import load_wards
from app.utils.io import write_json_atomic


def _optional(path: Optional[Path]) -> Optional[str]:
    return None if path is None else str(path)


def load_config_wards(config: RunConfig) -> Dict[str, WardData]:
    """
    按 [inputs] 段解析并构建病房，并按 wards 筛选

    Raises:
        ConfigException: 缺少输入、文件不存在或 wards 中有输入里没有的病房
    """
    inputs = config.require_inputs()
    wards = load_wards(
        str(inputs.admissions),
        _optional(inputs.tests),
        _optional(inputs.precautions),
        inputs.study_start.isoformat(),
        inputs.study_end.isoformat(),
        inputs.readmission_window,
        inputs.bed_capacity,
    )
    if config.wards is None:
        return dict(sorted(wards.items()))
    unknown = [ward_id for ward_id in config.wards if ward_id not in wards]
    if unknown:
        raise ConfigException(f"输入中没有这些病房: {', '.join(unknown)}（可选: {', '.join(sorted(wards))}）")
    return {ward_id: wards[ward_id] for ward_id in config.wards}


def json_ready(value: Any) -> Any:
    """把 NaN/inf 替换为 None，使输出为严格的 JSON"""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {key: json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    return value


def write_run_manifest(directory: Path, config: RunConfig, command: str, extra: Optional[Dict[str, Any]] = None) -> Path:
    """写出足以复现本次运行的清单：配置回显、种子与版本"""
    payload: Dict[str, Any] = {
        "command": command,
        "seed": config.seed,
        "version": settings.APP_VERSION,
        "config": config.model_dump(mode="json"),
    }
    if extra:
        payload.update(extra)
    return write_json_atomic(Path(directory) / f"{command}_manifest.json", json_ready(payload))


def job_name(ward_id: str, model: str) -> str:
    return f"{ward_id}/{model}"


def pair_directory(root: Path, ward_id: str, model: str) -> Path:
    return Path(root) / ward_id / model
