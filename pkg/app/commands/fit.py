"""
fit 子命令：每个 (病房, 模型) 运行一条链并写出后验样本
"""
from pathlib import Path
from typing import Any, Dict

from app.commands.common import job_name, load_config_wards, pair_directory, write_run_manifest
from app.commands.jobs import run_jobs, summarize_outcomes
from app.commands.run_config import RunConfig
from app.core.types import WardData
from app.mcmc.config import SamplerConfig
from app.mcmc.sampler import run_chain
from app.mcmc.samples import save_posterior


def fit_pair(ward: WardData, config: SamplerConfig, directory: Path) -> Dict[str, Any]:
    """运行一条链并落盘（进程池作业）"""
    samples = run_chain(ward, config)
    save_posterior(samples, directory)
    return {"n_draws": samples.n_draws, "acceptance": samples.acceptance_rates()}


def cmd_fit(config: RunConfig, jobs: int = 1) -> int:
    """
    拟合全部 (病房, 模型)

    Args:
        config: 运行配置
        jobs: 并行进程数

    Returns:
        退出码；部分作业失败时返回最严重的失败码
    """
    wards = load_config_wards(config)
    root = config.resolved_output_dir
    root.mkdir(parents=True, exist_ok=True)
    write_run_manifest(root, config, "fit", {"wards": list(wards)})

    work = []
    for ward_id, ward in wards.items():
        for kind in config.models:
            work.append((
                job_name(ward_id, kind.value),
                (ward, config.sampler_config(ward_id, kind), pair_directory(root, ward_id, kind.value)),
            ))
    outcomes = run_jobs(fit_pair, work, jobs)
    return summarize_outcomes(outcomes, "拟合")
