"""
部件样本之间的最小二乘相似变换（均匀缩放 + 旋转 + 平移）

alignment:
- 'vertical': 只允许绕竖直轴 (y) 旋转
- 'full': 任意三维旋转（Umeyama 闭式解）

源关节少于 3 个或共线时退化为仅平移的拟合，并在结果中标记。
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from ..core.errors import SizeError


logger = logging.getLogger(__name__)

_COLLINEAR_EPS = 1e-9
_ALIGNMENTS = ('vertical', 'full')


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """p -> scale * R p + t"""
    scale: float
    rotation: np.ndarray
    translation: np.ndarray
    residual: float = 0.0
    degenerate: bool = False

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points) @ self.rotation.T + self.translation

    @property
    def angle(self) -> float:
        """绕竖直轴的旋转角（仅对 vertical 对齐有意义）"""
        return float(np.arctan2(self.rotation[2, 0], self.rotation[0, 0]))


def _yaw_batch(phi: np.ndarray) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    rotation = np.zeros(phi.shape + (3, 3))
    rotation[..., 0, 0] = c
    rotation[..., 0, 2] = -s
    rotation[..., 1, 1] = 1.0
    rotation[..., 2, 0] = s
    rotation[..., 2, 2] = c
    return rotation


def fit_similarity_batch(
    src: np.ndarray,
    dst: np.ndarray,
    alignment: str = 'vertical',
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    批量拟合 dst ~ scale * R src + t

    Args:
        src, dst: (B, J, 3)

    Returns:
        (scale (B,), rotation (B, 3, 3), translation (B, 3), degenerate (B,))
    """
    if alignment not in _ALIGNMENTS:
        raise ValueError(f"未知的对齐方式: {alignment}")
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 3 or src.shape[2] != 3:
        raise SizeError(f"相似变换需要形状一致的 (B, J, 3) 关节集, 得到 {src.shape} 与 {dst.shape}")
    batch, joints = src.shape[:2]

    src_mean = src.mean(axis=1)
    dst_mean = dst.mean(axis=1)
    sc = src - src_mean[:, None, :]
    dc = dst - dst_mean[:, None, :]
    variance = np.einsum('bji,bji->b', sc, sc)

    if joints < 3:
        degenerate = np.ones(batch, dtype=bool)
    else:
        singular = np.linalg.svd(sc, compute_uv=False)
        degenerate = singular[:, 1] <= _COLLINEAR_EPS * np.maximum(singular[:, 0], 1.0)

    if alignment == 'vertical':
        a = np.einsum('bj,bj->b', dc[..., 0], sc[..., 0]) + np.einsum('bj,bj->b', dc[..., 2], sc[..., 2])
        b = np.einsum('bj,bj->b', dc[..., 2], sc[..., 0]) - np.einsum('bj,bj->b', dc[..., 0], sc[..., 2])
        rotation = _yaw_batch(np.arctan2(b, a))
    else:
        cross = np.einsum('bji,bjk->bik', dc, sc)
        u, _, vt = np.linalg.svd(cross)
        sign = np.sign(np.linalg.det(u) * np.linalg.det(vt))
        sign[sign == 0] = 1.0
        fix = np.ones((batch, 3))
        fix[:, 2] = sign
        rotation = np.einsum('bik,bk,bkj->bij', u, fix, vt)

    rotated = np.einsum('bik,bjk->bji', rotation, sc)
    safe = np.where(variance > 0, variance, 1.0)
    scale = np.where(variance > 0, np.einsum('bji,bji->b', dc, rotated) / safe, 1.0)
    # 缩放截断为非负
    scale = np.maximum(scale, 0.0)

    rotation[degenerate] = np.eye(3)
    scale[degenerate] = 1.0
    translation = dst_mean - scale[:, None] * np.einsum('bik,bk->bi', rotation, src_mean)
    return scale, rotation, translation, degenerate


def fit_similarity(src: np.ndarray, dst: np.ndarray, alignment: str = 'vertical') -> SimilarityTransform:
    """
    最小化 sum_j |dst_j - (s R src_j + t)|^2 的相似变换

    Raises:
        SizeError: 两组关节数量不一致
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape:
        raise SizeError(f"关节数量不一致: {src.shape} vs {dst.shape}")
    scale, rotation, translation, degenerate = fit_similarity_batch(src[None], dst[None], alignment)
    transform = SimilarityTransform(
        scale=float(scale[0]),
        rotation=rotation[0],
        translation=translation[0],
        degenerate=bool(degenerate[0]),
    )
    residual = float(np.sum((dst - transform.apply(src)) ** 2))
    if transform.degenerate:
        logger.debug("源关节共线或不足 3 个, 使用仅平移的拟合")
    return replace(transform, residual=residual)
