"""
后验样本及其落盘格式

每个 (病房, 模型) 目录下：
    samples.csv     每个记录样本一行
    manifest.json   配置回显、种子、接受率、快照迭代号
    snapshots.npy   增广快照（行为快照，列为住院段，inf 表示未定植）
"""
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.config import settings
from app.core.types import Augmentation, ModelKind, Theta
from app.exceptions import ValidationException
from app.utils.io import read_json, save_npy_atomic, write_csv_atomic, write_json_atomic
from app.utils.logger import logger


SAMPLE_COLUMNS = [
    "iteration", "p", "phi", "beta0", "beta1", "beta2",
    "loglik", "n1", "n_CA", "n_FN", "colonized_days",
]
PARAMETERS = ("p", "phi", "beta0", "beta1", "beta2")


class PosteriorSamples(BaseModel):
    """单条链的记录样本"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    ward_id: str
    model_kind: ModelKind
    draws: pd.DataFrame
    acceptance: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    snapshot_iterations: np.ndarray = Field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    snapshots: np.ndarray = Field(default_factory=lambda: np.zeros((0, 0)))
    seed: int = 0
    spawn_key: List[int] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    @property
    def n_snapshots(self) -> int:
        return int(self.snapshots.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.draws[name].to_numpy(dtype=float)

    def theta_at(self, index: int) -> Theta:
        row = self.draws.iloc[index]
        return Theta(
            p=float(row["p"]),
            phi=float(row["phi"]),
            beta0=float(row["beta0"]),
            beta1=float(row["beta1"]),
            beta2=float(row["beta2"]),
            model_kind=self.model_kind,
        )

    def thetas(self) -> Iterator[Theta]:
        for index in range(self.n_draws):
            yield self.theta_at(index)

    def posterior_mean_theta(self) -> Theta:
        means = {name: float(self.draws[name].mean()) for name in PARAMETERS}
        return Theta(model_kind=self.model_kind, **means)

    def snapshot(self, index: int) -> Augmentation:
        return Augmentation(colonization_times=self.snapshots[index].copy())

    def acceptance_rates(self) -> Dict[str, float]:
        return {name: float(entry.get("rate", 0.0)) for name, entry in self.acceptance.items()}


def save_posterior(samples: PosteriorSamples, directory: Union[str, Path]) -> Path:
    """
    写出后验样本目录

    Args:
        samples: 后验样本
        directory: 目标目录（不存在时创建）

    Returns:
        目录路径
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_csv_atomic(directory / "samples.csv", samples.draws[SAMPLE_COLUMNS])
    save_npy_atomic(directory / "snapshots.npy", samples.snapshots)
    manifest = {
        "ward_id": samples.ward_id,
        "model": samples.model_kind.value,
        "seed": samples.seed,
        "spawn_key": list(samples.spawn_key),
        "version": settings.APP_VERSION,
        "n_draws": samples.n_draws,
        "acceptance": samples.acceptance,
        "snapshot_iterations": [int(i) for i in samples.snapshot_iterations],
        "config": samples.config,
    }
    write_json_atomic(directory / "manifest.json", manifest)
    logger.info(f"后验样本已写出: {directory} ({samples.n_draws} 个样本, {samples.n_snapshots} 个快照)")
    return directory


def load_posterior(directory: Union[str, Path], ward_id: Optional[str] = None) -> PosteriorSamples:
    """
    读取后验样本目录

    Raises:
        ValidationException: 目录缺少必要文件或列
    """
    directory = Path(directory)
    samples_path = directory / "samples.csv"
    manifest_path = directory / "manifest.json"
    if not samples_path.exists() or not manifest_path.exists():
        raise ValidationException(f"后验样本目录不完整: {directory}")
    draws = pd.read_csv(samples_path)
    missing = [column for column in SAMPLE_COLUMNS if column not in draws.columns]
    if missing:
        raise ValidationException(f"{samples_path} 缺少列: {', '.join(missing)}")
    manifest = read_json(manifest_path)
    snapshots_path = directory / "snapshots.npy"
    snapshots = np.load(snapshots_path, allow_pickle=False) if snapshots_path.exists() else np.zeros((0, 0))
    return PosteriorSamples(
        ward_id=ward_id or manifest.get("ward_id", directory.parent.name),
        model_kind=ModelKind(manifest.get("model", directory.name)),
        draws=draws,
        acceptance=manifest.get("acceptance", {}),
        snapshot_iterations=np.asarray(manifest.get("snapshot_iterations", []), dtype=np.int64),
        snapshots=snapshots,
        seed=int(manifest.get("seed", 0)),
        spawn_key=list(manifest.get("spawn_key", [])),
        config=manifest.get("config", {}),
    )
