"""
assess 子命令：对已拟合的 (病房, 模型) 做模型比较与拟合优度评估
"""
import math
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from app.assess.efficacy import pool_efficacy
from app.assess.report import AssessmentReport, AssessSettings, assess_posterior
from app.assess.summary import ward_exploration
from app.commands.common import (
    job_name,
    json_ready,
    load_config_wards,
    pair_directory,
    write_run_manifest,
)
from app.commands.jobs import run_jobs, summarize_outcomes
from app.commands.run_config import RunConfig
from app.core.types import WardData
from app.exceptions import ValidationException
from app.mcmc.config import SamplerConfig
from app.mcmc.samples import load_posterior
from app.simulate.policy import SimPolicy
from app.utils.io import write_csv_atomic, write_json_atomic
from app.utils.logger import logger


def assess_pair(
    ward: WardData,
    directory: Path,
    fallback_config: SamplerConfig,
    settings: AssessSettings,
    policy: SimPolicy,
) -> AssessmentReport:
    """评估一个 (病房, 模型) 并写出明细（进程池作业）"""
    samples = load_posterior(directory, ward_id=ward.ward_id)
    chain_config = SamplerConfig.model_validate(samples.config) if samples.config else fallback_config
    report = assess_posterior(samples, ward, chain_config, settings, policy)
    write_report(report, directory)
    return report


def write_report(report: AssessmentReport, directory: Path) -> None:
    directory = Path(directory)
    write_json_atomic(directory / "report.json", json_ready(report.model_dump(mode="json")))
    write_csv_atomic(directory / "trajectory.csv", report.trajectory)
    write_csv_atomic(directory / "ppp.csv", report.ppp_totals)
    write_csv_atomic(directory / "carriage.csv", report.carriage_draws)
    write_csv_atomic(directory / "prevalence.csv", report.monthly)
    write_csv_atomic(directory / "posterior_summary.csv", report.summary)


def dic_table(reports: List[AssessmentReport], models: List[str]) -> pd.DataFrame:
    """每行一个病房，每列一个模型的 DIC₆，另列出 DIC₆ 最小的模型"""
    rows: Dict[str, Dict[str, float]] = {}
    for report in reports:
        rows.setdefault(report.ward_id, {})[report.model] = math.nan if report.dic6 is None else report.dic6
    frame = pd.DataFrame.from_dict(rows, orient="index").reindex(columns=models)
    frame.index.name = "ward_id"
    frame["preferred"] = [
        row.idxmin() if row.notna().any() else "" for _, row in frame[models].iterrows()
    ]
    return frame.reset_index()


def efficacy_table(reports: List[AssessmentReport]) -> pd.DataFrame:
    return pd.DataFrame([
        {"model": report.model, **report.efficacy.model_dump()} for report in reports
    ])


def pooled_efficacy_table(reports: List[AssessmentReport], models: List[str]) -> pd.DataFrame:
    """每个模型跨病房合并 log(β₁/β₂)；方差不可用的病房不参与合并"""
    rows = []
    for model in models:
        usable = [
            r.efficacy for r in reports
            if r.model == model
            and math.isfinite(r.efficacy.log_ratio_median)
            and math.isfinite(r.efficacy.log_ratio_variance)
            and r.efficacy.log_ratio_variance > 0
        ]
        if not usable:
            continue
        pooled = pool_efficacy(
            [e.log_ratio_median for e in usable],
            [e.log_ratio_variance for e in usable],
        )
        rows.append({"model": model, **pooled.model_dump()})
    return pd.DataFrame(rows, columns=[
        "model", "log_ratio", "variance", "lower", "upper", "ratio", "ratio_lower", "ratio_upper", "n_wards",
    ])


def cmd_assess(config: RunConfig, runs: Optional[Path] = None, jobs: int = 1) -> int:
    """
    评估全部已拟合的 (病房, 模型)

    Args:
        config: 运行配置（与 fit 使用的相同）
        runs: fit 的输出目录（默认为配置中的输出目录）
        jobs: 并行进程数

    Returns:
        退出码
    """
    root = Path(runs) if runs is not None else config.resolved_output_dir
    if not root.is_dir():
        raise ValidationException(f"拟合输出目录不存在: {root}；请先运行 fit")
    wards = load_config_wards(config)
    models = [kind.value for kind in config.models]

    work = []
    for ward_id, ward in wards.items():
        write_csv_atomic(root / ward_id / "exploration.csv", ward_exploration(ward, config.assess.exploration_days))
        for kind in config.models:
            directory = pair_directory(root, ward_id, kind.value)
            if not (directory / "samples.csv").exists():
                raise ValidationException(f"缺少后验样本: {directory}；请先运行 fit")
            work.append((
                job_name(ward_id, kind.value),
                (ward, directory, config.sampler_config(ward_id, kind), config.assess, config.policy),
            ))

    outcomes = run_jobs(assess_pair, work, jobs)
    reports = [outcome.result for outcome in outcomes if outcome.ok]
    if reports:
        write_csv_atomic(root / "dic_table.csv", dic_table(reports, models))
        write_csv_atomic(root / "efficacy.csv", efficacy_table(reports))
        write_csv_atomic(root / "pooled_efficacy.csv", pooled_efficacy_table(reports, models))
        write_csv_atomic(
            root / "posterior_summary.csv",
            pd.concat([report.summary for report in reports], ignore_index=True),
        )
        for report in reports:
            logger.info(
                f"{report.ward_id}/{report.model}: DIC₆={report.dic6} PPP={report.ppp:.3f} "
                f"P(β₁>β₂)={report.efficacy.prob_beta1_greater:.3f}"
            )
    write_run_manifest(root, config, "assess", {"runs": str(root)})
    return summarize_outcomes(outcomes, "评估")
