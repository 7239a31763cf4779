#!/usr/bin/env python3
"""
病房传播模型 MCMC 启动脚本（跨平台）

    python3 run.py fit --config config.toml --jobs 4
"""
import subprocess
import sys
from pathlib import Path


def check_python():
    """检查Python版本"""
    if sys.version_info < (3, 9):
        print("❌ 错误: 需要Python 3.9或更高版本", file=sys.stderr)
        sys.exit(1)


def check_dependencies():
    """检查并安装依赖"""
    required_packages = ["numpy", "scipy", "pandas", "statsmodels", "pydantic", "pydantic_settings", "loguru", "cachetools"]
    missing_packages = []

    for package in required_packages:
        try:
            __import__(package)
        except ImportError:
            missing_packages.append(package)

    if not missing_packages:
        return True

    print(f"⚠️  检测到缺少依赖: {', '.join(missing_packages)}", file=sys.stderr)
    print("📦 正在安装依赖...", file=sys.stderr)
    try:
        subprocess.check_call([sys.executable, "-m", "pip", "install", "-r", str(Path(__file__).parent / "requirements.txt"), "--timeout", "90000"])
        print("✅ 依赖安装完成", file=sys.stderr)
        return True
    except subprocess.CalledProcessError as e:
        print(f"❌ 依赖安装失败: {e}", file=sys.stderr)
        print("💡 请手动运行: pip install -r requirements.txt", file=sys.stderr)
        return False


def main():
    """主函数"""
    check_python()
    if not check_dependencies():
        sys.exit(2)

    from app.main import main as cli_main
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
