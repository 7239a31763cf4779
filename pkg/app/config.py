"""
配置管理模块
"""
from typing import Optional
try:
    from pydantic_settings import BaseSettings
except ImportError:
    # 兼容旧版本 pydantic
    from pydantic import BaseSettings


class Settings(BaseSettings):
    """进程级配置（环境变量 / .env）"""

    # 应用基础配置
    APP_NAME: str = "Ward Transmission MCMC"
    APP_VERSION: str = "1.0.0"

    # 日志配置
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # 输出目录覆盖（优先于运行配置文件中的 output_dir）
    OUTPUT_DIR: Optional[str] = None

    # 缓存配置
    CACHE_ENABLED: bool = True
    CACHE_TTL: int = 3600  # 缓存过期时间（秒）
    CACHE_MAX_SIZE: int = 64  # 缓存最大条目数（病房数据体积较大，条目数不宜过多）

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


# 全局配置实例
settings = Settings()
