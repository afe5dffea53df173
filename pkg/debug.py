import os
import sys

from dotenv import load_dotenv


def main():
    # 加载环境变量
    load_dotenv()

    # 设置调试环境变量
    os.environ["DEBUG"] = "True"
    os.environ["LOG_LEVEL"] = "DEBUG"
    os.environ["SHOW_PROGRESS"] = "True"

    from main import main as run

    # 默认跑一次合成数据上的完整实验，额外参数原样透传
    argv = sys.argv[1:] or ["reproduce", "--synth", "--seed", "42", "--out", "output/debug"]
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
