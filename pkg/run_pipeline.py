#!/usr/bin/env python3
"""
流水线命令行的入口脚本

使用方法:
    python run_pipeline.py synth --out data/synth
    python run_pipeline.py train --manifest data/synth/manifest.jsonl --out runs/model
    python run_pipeline.py eval --archive runs/model --manifest data/synth/manifest.jsonl
"""

import os
import sys

# 确保项目根目录在 Python 路径中
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# 加载 .env 文件（必须在导入其他模块之前）
from dotenv import load_dotenv
load_dotenv()

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
