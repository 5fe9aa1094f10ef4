"""
部件偏移的 3D 高斯分布、2D 投影与形变得分
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from ..core.data_models import DEFAULT_PARTS, ROOT_PART_ID, PartDefinition, Skeleton3D
from ..core.errors import EmptyInputError, NumericError, SizeError
from .projection import ProjectionParams, projection_matrix


logger = logging.getLogger(__name__)

DEFAULT_EIGEN_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class OffsetGaussian3D:
    """部件相对根部件的 3D 偏移: 均值与对角协方差（归一化骨架单位）"""
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(3)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape == (3,):
            cov = np.diag(cov)
        if cov.shape != (3, 3):
            raise SizeError(f"3D 协方差必须为 3x3, 得到 {cov.shape}")
        if np.any(np.abs(cov - np.diag(np.diag(cov))) > 0):
            raise NumericError("3D 偏移协方差必须为对角阵")
        if np.any(np.diag(cov) <= 0):
            raise NumericError(f"3D 偏移协方差对角元必须为正: {np.diag(cov).tolist()}")
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @classmethod
    def isotropic(cls, mean, sigma: float) -> 'OffsetGaussian3D':
        return cls(mean=mean, cov=np.eye(3) * sigma ** 2)

    @classmethod
    def from_precisions(cls, mean, horizontal: float, vertical: float) -> 'OffsetGaussian3D':
        """由水平 / 竖直精度构造水平各向同性的协方差 diag(1/qh, 1/qv, 1/qh)"""
        return cls(mean=mean, cov=np.diag([1.0 / horizontal, 1.0 / vertical, 1.0 / horizontal]))

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()


@dataclass(frozen=True, eq=False)
class OffsetGaussian2D:
    """投影后的 2D 偏移: 均值（像素或特征单元格）与 2x2 对称正定协方差"""
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'mean', np.asarray(self.mean, dtype=np.float64).reshape(2))
        object.__setattr__(self, 'cov', np.asarray(self.cov, dtype=np.float64).reshape(2, 2))

    @property
    def precision(self) -> np.ndarray:
        """协方差的逆；非对称正定时抛出 NumericError"""
        cov = self.cov
        if not np.all(np.isfinite(cov)) or abs(cov[0, 1] - cov[1, 0]) > 1e-12 * max(1.0, np.abs(cov).max()):
            raise NumericError(f"2D 协方差不是有限对称矩阵: {cov.tolist()}")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NumericError(f"2D 协方差不是正定矩阵: {cov.tolist()}")
        return np.linalg.inv(cov)

    @property
    def correlation(self) -> float:
        return float(self.cov[0, 1] / np.sqrt(self.cov[0, 0] * self.cov[1, 1]))


def floor_eigenvalues(cov: np.ndarray, floor: float = DEFAULT_EIGEN_FLOOR) -> np.ndarray:
    """把对称矩阵的特征值下限截断到 floor；已满足时原样返回"""
    cov = 0.5 * (cov + cov.T)
    values, vectors = np.linalg.eigh(cov)
    if values.min() >= floor:
        return cov
    values = np.maximum(values, floor)
    return (vectors * values) @ vectors.T


def project_offset(
    gaussian: OffsetGaussian3D,
    params: ProjectionParams,
    eigen_floor: float = DEFAULT_EIGEN_FLOOR,
) -> OffsetGaussian2D:
    """
    把 3D 偏移高斯投影到视角 theta 下

    mean = Q mu, cov = Q Sigma Q^T（特征值下限 eigen_floor）
    """
    q = projection_matrix(params)
    return OffsetGaussian2D(
        mean=q @ gaussian.mean,
        cov=floor_eigenvalues(q @ gaussian.cov @ q.T, eigen_floor),
    )


def deformation_score(v0, vi, gaussian: OffsetGaussian2D) -> float:
    """
    2D 形变得分 -(vi - v0 - mu)^T Sigma^-1 (vi - v0 - mu)

    Raises:
        NumericError: 协方差非对称正定
    """
    delta = np.asarray(vi, dtype=np.float64) - np.asarray(v0, dtype=np.float64) - gaussian.mean
    precision = gaussian.precision
    return float(-(
        precision[0, 0] * delta[0] ** 2
        + precision[1, 1] * delta[1] ** 2
        + 2.0 * precision[0, 1] * delta[0] * delta[1]
    ))


def part_offsets(skeleton: Skeleton3D, parts: Sequence[PartDefinition] = DEFAULT_PARTS) -> np.ndarray:
    """每个部件锚点相对根部件锚点的 3D 偏移 (K, 3)"""
    root_anchor = next(p.anchor for p in parts if p.part_id == ROOT_PART_ID)
    anchors = np.array([p.anchor for p in parts])
    return skeleton.positions[anchors] - skeleton.positions[root_anchor]


def estimate_offsets(
    skeletons: Sequence[Skeleton3D],
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    sigma0: float = 0.3,
) -> Dict[int, OffsetGaussian3D]:
    """
    由归一化骨架估计各部件的偏移均值

    均值为样本偏移的平均值，协方差初始化为 sigma0^2 * I（随后在训练中学习）。

    Raises:
        EmptyInputError: 骨架集合为空
    """
    if not skeletons:
        raise EmptyInputError("估计部件偏移需要至少一个骨架")
    offsets = np.stack([part_offsets(s, parts) for s in skeletons])
    means = offsets.mean(axis=0)
    return {
        part.part_id: OffsetGaussian3D.isotropic(means[index], sigma0)
        for index, part in enumerate(parts)
    }
