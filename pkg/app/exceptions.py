"""
自定义异常类

每个异常携带进程退出码：0 成功，1 校验错误，2 运行时失败。
"""
from typing import Optional


EXIT_OK = 0
EXIT_VALIDATION_ERROR = 1
EXIT_RUNTIME_FAILURE = 2


class BaseServiceException(Exception):
    """基础服务异常"""
    def __init__(self, detail: str, exit_code: int = EXIT_RUNTIME_FAILURE):
        super().__init__(detail)
        self.detail = detail
        self.exit_code = exit_code


class ValidationException(BaseServiceException):
    """校验异常（输入数据或参数不满足约束）"""
    def __init__(self, detail: str = "参数校验失败"):
        super().__init__(detail=detail, exit_code=EXIT_VALIDATION_ERROR)


class ConfigException(ValidationException):
    """运行配置异常"""
    def __init__(self, detail: str = "运行配置无效"):
        super().__init__(detail=detail)


class IngestException(ValidationException):
    """输入文件解析异常，指明文件与行号"""
    def __init__(self, detail: str, source: Optional[str] = None, row: Optional[int] = None):
        location = ""
        if source is not None:
            location = f"{source}"
            if row is not None:
                location += f" 第{row}行 (row {row})"
            location += ": "
        super().__init__(detail=f"{location}{detail}")
        self.source = source
        self.row = row


class InsufficientSamplesException(ValidationException):
    """后验样本不足（例如缺少增广快照）"""
    def __init__(self, detail: str = "后验样本不足"):
        super().__init__(detail=detail)


class SamplerException(BaseServiceException):
    """MCMC 采样器运行时异常"""
    def __init__(self, detail: str):
        super().__init__(detail=detail, exit_code=EXIT_RUNTIME_FAILURE)


class SimulationException(BaseServiceException):
    """前向模拟异常"""
    def __init__(self, detail: str):
        super().__init__(detail=detail, exit_code=EXIT_RUNTIME_FAILURE)
