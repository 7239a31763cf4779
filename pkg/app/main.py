"""
命令行主入口

    python -m app.main fit      --config run.toml [--jobs N]
    python -m app.main assess   --config run.toml [--runs DIR] [--jobs N]
    python -m app.main simulate --config run.toml [--out DIR]
    python -m app.main recover  --config run.toml [--jobs N]

退出码：0 成功，1 校验错误，2 运行时失败。
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from app.commands.assess import cmd_assess
from app.commands.fit import cmd_fit
from app.commands.recover import cmd_recover
from app.commands.run_config import load_run_config
from app.commands.simulate import cmd_simulate
from app.config import settings
from app.utils.error_handler import handle_command_errors
from app.utils.logger import logger


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"必须为正整数: {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ward-mcmc",
        description=f"{settings.APP_NAME} v{settings.APP_VERSION} - 病房传播模型的数据增广 MCMC",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", help="对每个 (病房, 模型) 运行 MCMC")
    fit.add_argument("--config", required=True, type=Path, help="运行配置文件（TOML）")
    fit.add_argument("--jobs", type=_positive_int, default=1, help="并行进程数")

    assess = subparsers.add_parser("assess", help="DIC₆、预测检验、未检出携带与隔离效果")
    assess.add_argument("--config", required=True, type=Path, help="运行配置文件（TOML）")
    assess.add_argument("--runs", type=Path, default=None, help="fit 的输出目录")
    assess.add_argument("--jobs", type=_positive_int, default=1, help="并行进程数")

    simulate = subparsers.add_parser("simulate", help="生成合成病房数据")
    simulate.add_argument("--config", required=True, type=Path, help="运行配置文件（TOML）")
    simulate.add_argument("--out", type=Path, default=None, help="输出目录")

    recover = subparsers.add_parser("recover", help="模拟、拟合并与真值比较")
    recover.add_argument("--config", required=True, type=Path, help="运行配置文件（TOML）")
    recover.add_argument("--jobs", type=_positive_int, default=1, help="并行进程数")
    return parser


@handle_command_errors
def dispatch(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    logger.info(f"{settings.APP_NAME} v{settings.APP_VERSION}: {args.command} (seed={config.seed})")
    if args.command == "fit":
        return cmd_fit(config, args.jobs)
    if args.command == "assess":
        return cmd_assess(config, args.runs, args.jobs)
    if args.command == "simulate":
        return cmd_simulate(config, args.out)
    return cmd_recover(config, args.jobs)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
