"""
simulate 子命令：生成合成病房，写出可直接解析的 CSV 与真实定植时间
"""
from pathlib import Path
from typing import List, Optional

import pandas as pd

from app.commands.common import write_run_manifest
from app.commands.run_config import RunConfig
from app.ingest.builder import serialize_ward_data
from app.simulate.synthetic import (
    SyntheticWard,
    format_summary_table,
    generate_synthetic_ward,
    ward_summary_statistics,
    write_truth,
)
from app.utils.io import write_csv_atomic


def generate_wards(config: RunConfig) -> List[SyntheticWard]:
    """按 [synthetic] 段生成 n_wards 个合成病房（每个病房独立的随机流）"""
    window = config.inputs.readmission_window if config.inputs is not None else 180.0
    return [
        generate_synthetic_ward(config.synthetic.ward_config(index, config.seed, config.policy, window))
        for index in range(config.synthetic.n_wards)
    ]


def write_synthetic(wards: List[SyntheticWard], study_start, directory: Path) -> pd.DataFrame:
    """写出三张输入表、truth.csv 与 summary.csv，返回描述性统计表"""
    directory = Path(directory)
    serialize_ward_data([synthetic.ward for synthetic in wards], study_start, directory)
    write_truth(directory / "truth.csv", wards)
    summary = pd.DataFrame([ward_summary_statistics(synthetic.ward).model_dump() for synthetic in wards])
    write_csv_atomic(directory / "summary.csv", summary)
    return summary


def cmd_simulate(config: RunConfig, out: Optional[Path] = None) -> int:
    """
    生成合成病房数据

    Args:
        config: 运行配置
        out: 输出目录（默认为配置输出目录下的 synthetic/）

    Returns:
        退出码
    """
    directory = Path(out) if out is not None else config.resolved_output_dir / "synthetic"
    wards = generate_wards(config)
    write_synthetic(wards, config.synthetic.study_start, directory)
    write_run_manifest(directory, config, "simulate", {"wards": [w.ward.ward_id for w in wards]})
    print(format_summary_table([ward_summary_statistics(synthetic.ward) for synthetic in wards]))
    return 0
