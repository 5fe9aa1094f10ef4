"""
线性 SVM 凸优化步

目标函数（lambda = 1 / (C n)）:

    F(w) = lambda / 2 |w|^2 + 1/n sum_n max(0, 1 - y_n w . x_n)

即 1/2 |w|^2 + C sum hinge 乘以常数 lambda。求解使用 Pegasos 式随机次梯度下降
（步长 1 / (lambda t)，投影到半径 1 / sqrt(lambda) 的球上，再按上下界截断），
之后沿 w 方向做一维精确线搜索。只有不增大目标函数的结果才被接受。

样本以 FeatureBatch 表示，只需要支持打分与梯度累加，姿态检测器的结构化特征
（部件特征块 x 视角插值权重）不必展开成稠密矩阵。
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..core.errors import EmptyInputError, NumericError, SizeError


logger = logging.getLogger(__name__)


class FeatureBatch(ABC):
    """训练样本集合的最小接口"""

    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def scores(self, w: np.ndarray, indices: Optional[np.ndarray] = None) -> np.ndarray:
        ...

    @abstractmethod
    def accumulate(self, w: np.ndarray, indices: np.ndarray, coefs: np.ndarray) -> None:
        """w += sum_i coefs_i x_{indices_i}（原地）"""


class DenseBatch(FeatureBatch):
    """稠密特征矩阵 (n, d)"""

    def __init__(self, features: np.ndarray, labels: Sequence[int]):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != labels.size:
            raise SizeError(f"特征矩阵 {features.shape} 与标签数量 {labels.size} 不一致")
        self.features = features
        self.labels = labels

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def scores(self, w: np.ndarray, indices: Optional[np.ndarray] = None) -> np.ndarray:
        rows = self.features if indices is None else self.features[indices]
        return rows @ w

    def accumulate(self, w: np.ndarray, indices: np.ndarray, coefs: np.ndarray) -> None:
        w += coefs @ self.features[indices]


@dataclass(frozen=True, eq=False)
class SolverResult:
    """一次凸优化步的结果"""
    weights: np.ndarray
    objective: float
    previous: float
    accepted: bool
    steps: int


def regularization(C: float, n: int) -> float:
    return 1.0 / (C * n)


def hinge_slacks(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - labels * scores)


def svm_objective(w: np.ndarray, scores: np.ndarray, labels: np.ndarray, lam: float) -> float:
    return float(0.5 * lam * (w @ w) + hinge_slacks(scores, labels).mean())


def _unbounded(dim: int):
    return np.full(dim, -np.inf), np.full(dim, np.inf)


def project(w: np.ndarray, lam: float, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(w))
    radius = 1.0 / np.sqrt(lam)
    if norm > radius:
        w = w * (radius / norm)
    return np.clip(w, lower, upper)


def pegasos(
    batch: FeatureBatch,
    lam: float,
    epochs: int,
    batch_size: Optional[int] = 1,
    rng: Optional[np.random.Generator] = None,
    w0: Optional[np.ndarray] = None,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
    start: int = 0,
) -> np.ndarray:
    """
    随机次梯度下降

    Args:
        batch: 训练样本
        lam: 正则化系数
        epochs: 轮数；每轮按 rng 打乱后依次取小批量
        batch_size: 小批量大小，None 为全批量（确定性，不使用 rng）
        w0: 初始权重
        lower, upper: 逐维上下界
        start: 步数计数起点，热启动时沿用之前的步长序列
    """
    n = len(batch)
    if lower is None or upper is None:
        lower, upper = _unbounded(batch.dim)
    w = np.zeros(batch.dim) if w0 is None else np.array(w0, dtype=np.float64)
    size = n if batch_size is None else min(batch_size, n)
    rng = rng or np.random.default_rng(0)
    t = start
    for _ in range(epochs):
        order = np.arange(n) if size == n else rng.permutation(n)
        for first in range(0, n, size):
            indices = order[first:first + size]
            t += 1
            step = 1.0 / (lam * t)
            margins = batch.labels[indices] * batch.scores(w, indices)
            active = indices[margins < 1.0]
            w *= 1.0 - step * lam
            if active.size:
                batch.accumulate(w, active, (step / indices.size) * batch.labels[active])
            w = project(w, lam, lower, upper)
    return w


def _scale_range(w: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    nonzero = w != 0.0
    if not nonzero.any():
        return 0.0, np.inf
    value = w[nonzero]
    first, second = lower[nonzero] / value, upper[nonzero] / value
    lo = np.where(value > 0, first, second)
    hi = np.where(value > 0, second, first)
    return max(0.0, float(lo.max())), float(hi.min())


def best_scale(
    w: np.ndarray,
    scores: np.ndarray,
    labels: np.ndarray,
    lam: float,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
) -> float:
    """
    沿 w 方向的精确线搜索: argmin_s F(s w)

    F(s) 是分段二次凸函数，断点为 1 / m_n（m_n = y_n w . x_n > 0），在每段上取截断后的驻点。
    """
    norm2 = float(w @ w)
    if norm2 == 0.0:
        return 1.0
    if lower is None or upper is None:
        lower, upper = _unbounded(w.size)
    s_lo, s_hi = _scale_range(w, lower, upper)
    if s_lo > s_hi:
        return 1.0
    margins = labels * scores
    n = margins.size
    positive = margins > 0
    descending = np.sort(margins[positive])[::-1]
    breakpoints = 1.0 / descending
    base_count = np.count_nonzero(~positive)
    base_sum = float(margins[~positive].sum())
    k = descending.size
    suffix = np.concatenate([np.cumsum(descending[::-1])[::-1], [0.0]])
    counts = base_count + k - np.arange(k + 1)
    sums = base_sum + suffix
    left = np.maximum(np.concatenate([[0.0], breakpoints]), s_lo)
    right = np.minimum(np.concatenate([breakpoints, [np.inf]]), s_hi)
    feasible = left <= right
    scale = np.clip(sums / (n * lam * norm2), left, right)
    values = 0.5 * lam * norm2 * scale ** 2 + (counts - scale * sums) / n
    values[~feasible] = np.inf
    return float(scale[int(np.argmin(values))])


def convex_step(
    batch: FeatureBatch,
    lam: float,
    epochs: int,
    batch_size: Optional[int] = 1,
    rng: Optional[np.random.Generator] = None,
    w0: Optional[np.ndarray] = None,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
    start: int = 0,
    objective: Optional[Callable[[np.ndarray], float]] = None,
    previous: Optional[float] = None,
) -> SolverResult:
    """
    一次凸优化步: 次梯度下降 + 线搜索 + 单调保护

    Args:
        objective: 评估候选权重的目标函数，默认为本批样本上的 F(w)；
            隐变量训练中负样本的得分需要在新权重下重新最大化，由调用方提供
        previous: w0 处的目标函数值（已知时避免重复计算）

    Raises:
        EmptyInputError: 没有样本
        NumericError: 目标函数非有限
    """
    if len(batch) == 0:
        raise EmptyInputError("凸优化步没有训练样本")
    if lower is None or upper is None:
        lower, upper = _unbounded(batch.dim)
    w0 = np.zeros(batch.dim) if w0 is None else np.asarray(w0, dtype=np.float64)
    if objective is None:
        objective = lambda w: svm_objective(w, batch.scores(w), batch.labels, lam)
    if previous is None:
        previous = objective(w0)

    w = pegasos(batch, lam, epochs, batch_size, rng, w0, lower, upper, start)
    w = w * best_scale(w, batch.scores(w), batch.labels, lam, lower, upper)
    value = objective(w)
    if not np.isfinite(value):
        raise NumericError(
            "目标函数出现非有限值",
            details=f"|w|={np.linalg.norm(w):.4g}, lambda={lam:.4g}, 上一步目标={previous:.6g}",
        )
    steps = epochs * int(np.ceil(len(batch) / (len(batch) if batch_size is None else min(batch_size, len(batch)))))
    if value <= previous:
        return SolverResult(weights=w, objective=value, previous=previous, accepted=True, steps=steps)
    logger.debug(f"凸优化步使目标函数从 {previous:.6g} 增加到 {value:.6g}, 保留原权重")
    return SolverResult(weights=w0.copy(), objective=previous, previous=previous, accepted=False, steps=steps)
