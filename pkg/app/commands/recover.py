"""
recover 子命令：模拟 → 写出 → 重新解析 → 拟合 → 与真值比较
"""
import datetime as dt
from typing import Any, Dict

import pandas as pd

from app.assess.summary import recovery_coverage
from app.commands.common import job_name, pair_directory, write_run_manifest
from app.commands.jobs import run_jobs, summarize_outcomes
from app.commands.run_config import RunConfig
from app.commands.simulate import generate_wards, write_synthetic
from app.core.types import Theta, WardData
from app.ingest.builder import load_wards
from app.mcmc.config import SamplerConfig
from app.mcmc.sampler import run_chain
from app.mcmc.samples import save_posterior
from app.simulate.synthetic import format_summary_table, ward_summary_statistics
from app.utils.io import write_csv_atomic
from app.utils.logger import logger


def recover_ward(ward: WardData, config: SamplerConfig, truth: Theta, level: float, directory) -> pd.DataFrame:
    """拟合一个合成病房并计算覆盖情况（进程池作业）"""
    samples = run_chain(ward, config)
    save_posterior(samples, directory)
    return recovery_coverage(truth, samples, level)


def coverage_counts(coverage: pd.DataFrame) -> pd.DataFrame:
    """每个参数被覆盖的病房数"""
    counts = coverage.groupby("parameter", sort=False)["covered"].agg(covered="sum", n_wards="size")
    counts["covered"] = counts["covered"].astype(int)
    return counts.reset_index()


def cmd_recover(config: RunConfig, jobs: int = 1) -> int:
    """
    参数恢复实验

    合成数据写入 <output_dir>/recover/data，经解析器重新读入后拟合 [synthetic].model，
    结果写入 recovery.csv 与 recovery_summary.csv。

    Returns:
        退出码
    """
    synthetic = config.synthetic
    root = config.resolved_output_dir / "recover"
    data_dir = root / "data"
    wards = generate_wards(config)
    write_synthetic(wards, synthetic.study_start, data_dir)
    print(format_summary_table([ward_summary_statistics(w.ward) for w in wards]))

    window = config.inputs.readmission_window if config.inputs is not None else 180.0
    study_end = synthetic.study_start + dt.timedelta(days=synthetic.study_days)
    parsed = load_wards(
        str(data_dir / "admissions.csv"),
        str(data_dir / "tests.csv"),
        str(data_dir / "precautions.csv"),
        synthetic.study_start.isoformat(),
        study_end.isoformat(),
        window,
        None,
    )

    kind = synthetic.model
    work = []
    for generated in wards:
        ward_id = generated.ward.ward_id
        work.append((
            job_name(ward_id, kind.value),
            (parsed[ward_id], config.sampler_config(ward_id, kind), generated.theta, synthetic.level,
             pair_directory(root, ward_id, kind.value)),
        ))
    outcomes = run_jobs(recover_ward, work, jobs)

    frames = [outcome.result for outcome in outcomes if outcome.ok]
    extra: Dict[str, Any] = {"wards": [w.ward.ward_id for w in wards], "model": kind.value}
    if frames:
        coverage = pd.concat(frames, ignore_index=True)
        counts = coverage_counts(coverage)
        write_csv_atomic(root / "recovery.csv", coverage)
        write_csv_atomic(root / "recovery_summary.csv", counts)
        for row in counts.itertuples():
            logger.info(f"参数恢复 {row.parameter}: 覆盖 {row.covered}/{row.n_wards}")
    write_run_manifest(root, config, "recover", extra)
    return summarize_outcomes(outcomes, "参数恢复")
