"""
CLI - 命令行子命令、合成语料与评估报告
"""

from .evaluation import ConfusionMatrix, accuracy_from_scores, evaluation_report
from .main import build_parser, main
from .synth import synthesize, synthetic_dataset, write_corpus

__all__ = [
    'ConfusionMatrix',
    'accuracy_from_scores',
    'evaluation_report',
    'build_parser',
    'main',
    'synthesize',
    'synthetic_dataset',
    'write_corpus',
]
