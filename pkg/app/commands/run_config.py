"""
运行配置文件（TOML）

    seed = 20240101               # 必填
    output_dir = "runs"
    models = ["full", "no_background", "non_linear"]
    wards = ["M1", "M2"]          # 省略时使用输入中的全部病房

    [inputs]      admissions, tests, precautions, study_start, study_end, readmission_window, bed_capacity
    [prior]       p_alpha, p_beta, phi_alpha, phi_beta, beta_rate
    [sampler]     iterations, burn_in, thin, rw_sd, phi0, moves_per_iteration, snapshot_stride, ...
    [policy]      test_schedule, compliance, precaution_rule, delay, screening_interval
    [assess]      dic_iterations, dic_burn_in, ppp_replicates, n_sims, interval_days, ...
    [synthetic]   n_wards, beds, study_days, arrival_rate, los_median, los_sd, p, phi, beta0..2, ...

未知的键会被拒绝。
"""
import datetime as dt
import zlib
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict, TomlConfigSettingsSource

from app.assess.report import AssessSettings
from app.config import settings
from app.core.likelihood import PriorConfig
from app.core.types import ModelKind, Theta
from app.exceptions import ConfigException
from app.mcmc.config import SamplerConfig
from app.simulate.policy import PrecautionRule, ScreeningSchedule, SimPolicy
from app.simulate.synthetic import SyntheticWardConfig, default_theta


_DEFAULT_THETA = default_theta()


class InputsConfig(BaseModel):
    """输入文件与研究窗口"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    admissions: Path
    tests: Optional[Path] = None
    precautions: Optional[Path] = None
    study_start: dt.date
    study_end: dt.date
    readmission_window: float = Field(default=180.0, ge=0)
    bed_capacity: Optional[int] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check_window(self) -> "InputsConfig":
        if self.study_end <= self.study_start:
            raise ValueError(f"study_end ({self.study_end}) 必须晚于 study_start ({self.study_start})")
        return self

    def missing_paths(self) -> List[Path]:
        return [path for path in (self.admissions, self.tests, self.precautions) if path is not None and not path.exists()]


class PriorOverrides(BaseModel):
    """先验覆盖值；beta_rate 统一替换 β 的指数先验速率"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    p_alpha: float = Field(default=1.0, gt=0)
    p_beta: float = Field(default=1.0, gt=0)
    phi_alpha: float = Field(default=1.0, gt=0)
    phi_beta: float = Field(default=1.0, gt=0)
    beta_rate: Optional[float] = Field(default=None, gt=0)

    def for_model(self, kind: ModelKind) -> PriorConfig:
        return PriorConfig.for_model(
            kind,
            beta_rate=self.beta_rate,
            p_alpha=self.p_alpha,
            p_beta=self.p_beta,
            phi_alpha=self.phi_alpha,
            phi_beta=self.phi_beta,
        )


class SamplerSettings(BaseModel):
    """[sampler] 段；种子与派生键由 RunConfig 按 (病房, 模型) 决定"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    iterations: int = Field(default=200_000, gt=0)
    burn_in: int = Field(default=10_000, ge=0)
    thin: int = Field(default=10, gt=0)
    rw_sd: Union[float, Tuple[float, float, float]] = 0.002
    phi0: float = Field(default=0.3, gt=0, lt=1)
    moves_per_iteration: int = Field(default=1, gt=0)
    snapshot_stride: int = Field(default=10, ge=0)
    check_every: int = Field(default=1000, gt=0)
    progress_every: int = Field(default=10_000, ge=0)
    debug_checks: bool = False

    @property
    def rw_sd_triple(self) -> Tuple[float, float, float]:
        if isinstance(self.rw_sd, tuple):
            return self.rw_sd
        return (float(self.rw_sd),) * 3


class PolicyConfig(SimPolicy):
    """[policy] 段"""
    model_config = ConfigDict(frozen=True, extra="forbid")


class SyntheticConfig(BaseModel):
    """[synthetic] 段：合成病房与参数恢复"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_wards: int = Field(default=1, gt=0)
    beds: int = Field(default=10, gt=0)
    study_days: int = Field(default=510, gt=0)
    arrival_rate: float = Field(default=2.5, gt=0)
    los_median: float = Field(default=3.5, gt=0)
    los_sd: float = Field(default=5.0, gt=0)
    readmission_probability: float = Field(default=0.0, ge=0, le=1)
    model: ModelKind = ModelKind.FULL
    p: float = Field(default=_DEFAULT_THETA.p, ge=0, le=1)
    phi: float = Field(default=_DEFAULT_THETA.phi, ge=0, le=1)
    beta0: float = Field(default=_DEFAULT_THETA.beta0, ge=0)
    beta1: float = Field(default=_DEFAULT_THETA.beta1, ge=0)
    beta2: float = Field(default=_DEFAULT_THETA.beta2, ge=0)
    study_start: dt.date = dt.date(2020, 1, 1)
    level: float = Field(default=0.95, gt=0, lt=1)

    @property
    def theta(self) -> Theta:
        return Theta(
            p=self.p, phi=self.phi, beta0=self.beta0, beta1=self.beta1, beta2=self.beta2,
            model_kind=self.model,
        )

    def ward_id(self, index: int) -> str:
        return f"SIM{index + 1:02d}"

    def ward_config(self, index: int, seed: int, policy: SimPolicy, readmission_window: float) -> SyntheticWardConfig:
        """
        第 index 个合成病房的配置

        合成病房没有观测检测与隔离可沿用，检测固定为入院加每周、隔离固定为检出后开始，
        依从率、间隔与延迟取自 [policy]。
        """
        return SyntheticWardConfig(
            ward_id=self.ward_id(index),
            beds=self.beds,
            study_days=self.study_days,
            arrival_rate=self.arrival_rate,
            los_median=self.los_median,
            los_sd=self.los_sd,
            theta=self.theta,
            policy=policy.model_copy(update={
                "test_schedule": ScreeningSchedule.ADMISSION_PLUS_WEEKLY,
                "precaution_rule": PrecautionRule.ON_DETECTION,
            }),
            readmission_probability=self.readmission_probability,
            readmission_window=readmission_window,
            seed=seed,
            spawn_key=(index,),
        )


class RunConfig(BaseSettings):
    """
    一次运行的全部配置

    只从 TOML 文件读取；环境变量只通过 Settings.OUTPUT_DIR 覆盖输出目录。
    """
    model_config = SettingsConfigDict(frozen=True, extra="forbid")

    seed: int = Field(ge=0, lt=2**64)
    output_dir: Path = Path("runs")
    models: List[ModelKind] = Field(default_factory=lambda: list(ModelKind))
    wards: Optional[List[str]] = None
    inputs: Optional[InputsConfig] = None
    prior: PriorOverrides = Field(default_factory=PriorOverrides)
    sampler: SamplerSettings = Field(default_factory=SamplerSettings)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    assess: AssessSettings = Field(default_factory=AssessSettings)
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)

    @classmethod
    def settings_customise_sources(cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings):
        return (init_settings,)

    @field_validator("models")
    @classmethod
    def _models_unique(cls, value: List[ModelKind]) -> List[ModelKind]:
        if not value:
            raise ValueError("models 不能为空")
        if len(set(value)) != len(value):
            raise ValueError(f"models 存在重复: {[m.value for m in value]}")
        return value

    @model_validator(mode="after")
    def _check_sampler(self) -> "RunConfig":
        if self.sampler.burn_in >= self.sampler.iterations:
            raise ValueError(
                f"sampler.burn_in ({self.sampler.burn_in}) 必须小于 sampler.iterations ({self.sampler.iterations})"
            )
        return self

    @property
    def resolved_output_dir(self) -> Path:
        return Path(settings.OUTPUT_DIR) if settings.OUTPUT_DIR else self.output_dir

    def require_inputs(self) -> InputsConfig:
        """
        Raises:
            ConfigException: 缺少 [inputs] 段或引用的文件不存在
        """
        if self.inputs is None:
            raise ConfigException("运行配置缺少 [inputs] 段")
        missing = self.inputs.missing_paths()
        if missing:
            raise ConfigException(f"输入文件不存在: {', '.join(str(path) for path in missing)}")
        return self.inputs

    def sampler_config(self, ward_id: str, kind: ModelKind) -> SamplerConfig:
        """(病房, 模型) 作业的采样器配置"""
        s = self.sampler
        return SamplerConfig(
            iterations=s.iterations,
            burn_in=s.burn_in,
            thin=s.thin,
            rw_sd=s.rw_sd_triple,
            phi0=s.phi0,
            seed=self.seed,
            spawn_key=job_spawn_key(ward_id, kind),
            prior=self.prior.for_model(kind),
            model_kind=kind,
            moves_per_iteration=s.moves_per_iteration,
            snapshot_stride=s.snapshot_stride,
            check_every=s.check_every,
            progress_every=s.progress_every,
            debug_checks=s.debug_checks,
        )


def job_spawn_key(ward_id: str, kind: ModelKind) -> Tuple[int, int]:
    """由病房编号与模型种类确定的派生键，与作业的执行顺序无关"""
    return zlib.crc32(ward_id.encode("utf-8")), list(ModelKind).index(ModelKind(kind))


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    读取并校验运行配置文件

    Raises:
        ConfigException: 文件不存在、TOML 语法错误或字段校验失败
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigException(f"运行配置文件不存在: {path}")
    try:
        data = TomlConfigSettingsSource(RunConfig, toml_file=path)()
    except ValueError as e:
        raise ConfigException(f"{path}: TOML 解析失败: {e}")
    try:
        return RunConfig(**data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}" for error in e.errors()
        )
        raise ConfigException(f"{path}: {problems}")
