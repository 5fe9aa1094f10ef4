"""
评估报告

混淆矩阵（行为真实标签，列为预测）、逐视频得分表与准确率汇总。
得分表包含真实标签与预测标签两列，由它重新计算的准确率与汇总中的值完全一致。
"""

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.errors import UsageError
from ..inference import Classification


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """C x C 计数矩阵"""
    vocabulary: tuple
    counts: np.ndarray

    @classmethod
    def from_predictions(cls, truth: Sequence[str], predicted: Sequence[str], vocabulary: Sequence[str]) -> 'ConfusionMatrix':
        """
        Raises:
            UsageError: 标签不在词表中
        """
        vocabulary = tuple(vocabulary)
        index = {label: i for i, label in enumerate(vocabulary)}
        unknown = sorted((set(truth) | set(predicted)) - set(index))
        if unknown:
            raise UsageError(f"标签不在词表中: {unknown}")
        counts = np.zeros((len(vocabulary), len(vocabulary)), dtype=np.int64)
        for t, p in zip(truth, predicted):
            counts[index[t], index[p]] += 1
        return cls(vocabulary=vocabulary, counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        """trace / total；没有样本时为 0"""
        return float(np.trace(self.counts)) / self.total if self.total else 0.0

    def per_class_accuracy(self) -> Dict[str, float]:
        """每类的召回率；该类没有测试样本时为 nan"""
        rows = self.counts.sum(axis=1)
        return {
            label: float(self.counts[i, i] / rows[i]) if rows[i] else float('nan')
            for i, label in enumerate(self.vocabulary)
        }

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open('w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle)
            writer.writerow(['truth\\predicted'] + list(self.vocabulary))
            for label, row in zip(self.vocabulary, self.counts):
                writer.writerow([label] + [int(v) for v in row])
        return path


def check_vocabulary(archive_vocabulary: Sequence[str], dataset_vocabulary: Sequence[str]) -> None:
    """
    测试集的动作必须都在模型词表中

    Raises:
        UsageError: 词表不兼容
    """
    missing = sorted(set(dataset_vocabulary) - set(archive_vocabulary))
    if missing:
        raise UsageError(f"测试集包含模型词表之外的动作: {missing}")


def write_scores(
    path: Union[str, Path],
    results: Sequence[Classification],
    truth: Sequence[str],
    vocabulary: Sequence[str],
) -> Path:
    """逐视频得分表: sample_id, truth, predicted, view_bin, score_<label> ..."""
    path = Path(path)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(['sample_id', 'truth', 'predicted', 'view_bin'] + [f"score_{label}" for label in vocabulary])
        for result, label in zip(results, truth):
            view = '' if result.view_bin is None else result.view_bin
            writer.writerow(
                [result.sample_id, label, result.label, view]
                + [repr(float(result.scores[c])) if c in result.scores else '' for c in vocabulary]
            )
    return path


def accuracy_from_scores(path: Union[str, Path]) -> float:
    """由得分表重新计算准确率"""
    with Path(path).open(newline='', encoding='utf-8') as handle:
        rows = list(csv.DictReader(handle))
    if not rows:
        return 0.0
    return sum(row['truth'] == row['predicted'] for row in rows) / len(rows)


def write_predictions(path: Union[str, Path], results: Sequence[Classification]) -> Path:
    """infer 的输出: 每行一段视频的 JSON（标签、各动作得分、多数票视角 bin）"""
    path = Path(path)
    path.write_text(''.join(json.dumps(r.to_dict(), sort_keys=True) + '\n' for r in results), encoding='utf-8')
    return path


def evaluation_report(
    out_dir: Union[str, Path],
    results: Sequence[Classification],
    truth: Sequence[str],
    vocabulary: Sequence[str],
    cameras: Optional[Sequence[str]] = None,
) -> dict:
    """
    写出 confusion.csv、scores.csv 与 summary.json

    Returns:
        汇总字典
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    matrix = ConfusionMatrix.from_predictions(truth, [r.label for r in results], vocabulary)
    matrix.write_csv(out_dir / 'confusion.csv')
    write_scores(out_dir / 'scores.csv', results, truth, vocabulary)
    summary = {
        'num_videos': matrix.total,
        'accuracy': matrix.accuracy,
        'per_class_accuracy': {
            label: (None if np.isnan(value) else value)
            for label, value in matrix.per_class_accuracy().items()
        },
        'vocabulary': list(vocabulary),
    }
    if cameras is not None:
        summary['per_camera'] = view_breakdown(results, truth, cameras)
    (out_dir / 'summary.json').write_text(json.dumps(summary, indent=2, sort_keys=True), encoding='utf-8')
    logger.info(f"评估完成: {matrix.total} 段视频, 准确率 {matrix.accuracy:.4f}")
    return summary


def view_breakdown(results: Sequence[Classification], truth: Sequence[str], cameras: Sequence[str]) -> List[dict]:
    """按摄像机分组的准确率"""
    groups: Dict[str, List[bool]] = {}
    for result, label, camera in zip(results, truth, cameras):
        groups.setdefault(camera or '', []).append(result.label == label)
    return [
        {'camera': camera, 'num_videos': len(hits), 'accuracy': sum(hits) / len(hits)}
        for camera, hits in sorted(groups.items())
    ]
