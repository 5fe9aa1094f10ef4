"""
姿态检测器的参数向量与特征

参数向量 w = [根部件模板 (M x L_0), 子部件模板 (M x L_i) ..., (q_h, q_v) x N, 偏置]。
给定视角 bin m 与部件位置，特征为:
- 每个部件: 插值权重 omega(theta_m) 与展开特征块的外积
- 每个子部件: [-(dx - mu_x)^2 / k^2, -(dy - mu_y)^2 / k^2]
- 偏置: 1

水平各向同性协方差 diag(1/q_h, 1/q_v, 1/q_h) 投影后为 diag(k^2/q_h, k^2/q_v)，
所以形变得分对 (q_h, q_v) 是线性的，w . phi 等于视角节点得分。
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..aog import PoseModel, extract_patch
from ..core.errors import SizeError
from ..geometry import OffsetGaussian3D
from .latent_svm import FeatureBatch


logger = logging.getLogger(__name__)

MIN_PRECISION = 1e-3


@dataclass(frozen=True, eq=False)
class PlacementFeatures:
    """一个姿态配置的紧凑特征"""
    patches: Tuple[np.ndarray, ...]
    omega: np.ndarray
    deform: np.ndarray


class PoseLayout:
    """参数向量各段的位置"""

    def __init__(self, pose: PoseModel):
        self.num_bins = pose.num_bins
        self.part_sizes = tuple(part.stacked_templates.shape[1] for part in pose.parts)
        starts = np.cumsum((0,) + tuple(self.num_bins * size for size in self.part_sizes))
        self.blocks = tuple(slice(int(a), int(b)) for a, b in zip(starts[:-1], starts[1:]))
        self.num_children = len(pose.children)
        self.precision_slice = slice(int(starts[-1]), int(starts[-1]) + 2 * self.num_children)
        self.bias_index = self.precision_slice.stop
        self.dim = self.bias_index + 1

    def pack(self, pose: PoseModel) -> np.ndarray:
        w = np.zeros(self.dim)
        for block, part in zip(self.blocks, pose.parts):
            w[block] = part.stacked_templates.ravel()
        precisions = []
        for child in pose.children:
            variances = child.offset.variances
            precisions.extend([1.0 / variances[0], 1.0 / variances[1]])
        w[self.precision_slice] = precisions
        w[self.bias_index] = pose.bias
        return w

    def unpack(self, pose: PoseModel, w: np.ndarray) -> PoseModel:
        parts = [
            part.with_stacked_templates(w[block].reshape(self.num_bins, size))
            for block, part, size in zip(self.blocks, pose.parts, self.part_sizes)
        ]
        precisions = w[self.precision_slice].reshape(self.num_children, 2)
        children = tuple(
            replace(part, offset=OffsetGaussian3D.from_precisions(child.offset.mean, q[0], q[1]))
            for part, child, q in zip(parts[1:], pose.children, precisions)
        )
        return replace(pose, root=parts[0], children=children, bias=float(w[self.bias_index]))

    def bounds(self, sigma_min: float) -> Tuple[np.ndarray, np.ndarray]:
        """精度 q 限制在 [MIN_PRECISION, 1 / sigma_min]，即方差不低于 sigma_min"""
        lower = np.full(self.dim, -np.inf)
        upper = np.full(self.dim, np.inf)
        lower[self.precision_slice] = MIN_PRECISION
        upper[self.precision_slice] = 1.0 / sigma_min
        return lower, upper


def deformation_features(pose: PoseModel, view_bin: int, locations: Sequence[Sequence[int]]) -> np.ndarray:
    """(2N,) 每个子部件的 [-(dx - mu_x)^2 / k^2, -(dy - mu_y)^2 / k^2]"""
    theta = float(pose.view_centers[view_bin])
    root = np.asarray(locations[0], dtype=np.float64)
    k2 = pose.model_scale ** 2
    values = []
    for gaussian, location in zip(pose.projected_offsets(theta), locations[1:]):
        delta = np.asarray(location, dtype=np.float64) - root - gaussian.mean
        values.extend([-delta[0] ** 2 / k2, -delta[1] ** 2 / k2])
    return np.asarray(values)


def placement_features(
    stacked: np.ndarray,
    pose: PoseModel,
    view_bin: int,
    locations: Sequence[Sequence[int]],
) -> PlacementFeatures:
    """
    Raises:
        SizeError: 部件位置数量不对或窗口超出网格
    """
    if len(locations) != len(pose.parts):
        raise SizeError(f"需要 {len(pose.parts)} 个部件位置, 得到 {len(locations)}")
    patches = tuple(
        extract_patch(stacked, location, part.window).ravel()
        for part, location in zip(pose.parts, locations)
    )
    return PlacementFeatures(
        patches=patches,
        omega=pose.view_weights(float(pose.view_centers[view_bin])),
        deform=deformation_features(pose, view_bin, locations),
    )


def placement_score(layout: PoseLayout, w: np.ndarray, features: PlacementFeatures) -> float:
    total = float(w[layout.bias_index]) + float(w[layout.precision_slice] @ features.deform)
    for block, size, patch in zip(layout.blocks, layout.part_sizes, features.patches):
        total += float(features.omega @ (w[block].reshape(layout.num_bins, size) @ patch))
    return total


class PoseBatch(FeatureBatch):
    """
    姿态检测器的训练样本

    每个部件的特征块堆叠成 (n, L_p)，插值权重 (n, M)，形变特征 (n, 2N)。
    """

    def __init__(self, layout: PoseLayout, features: Sequence[PlacementFeatures], labels: Sequence[int]):
        self.layout = layout
        self.labels = np.asarray(labels, dtype=np.float64)
        if len(features) != self.labels.size:
            raise SizeError(f"特征数量 {len(features)} 与标签数量 {self.labels.size} 不一致")
        count = len(layout.part_sizes)
        self.patches: List[np.ndarray] = [
            np.stack([f.patches[p] for f in features]) if features else np.zeros((0, layout.part_sizes[p]))
            for p in range(count)
        ]
        self.omega = np.stack([f.omega for f in features]) if features else np.zeros((0, layout.num_bins))
        self.deform = (
            np.stack([f.deform for f in features]) if features else np.zeros((0, 2 * layout.num_children))
        ).reshape(len(features), 2 * layout.num_children)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def scores(self, w: np.ndarray, indices: Optional[np.ndarray] = None) -> np.ndarray:
        select = slice(None) if indices is None else indices
        layout = self.layout
        omega = self.omega[select]
        total = self.deform[select] @ w[layout.precision_slice] + w[layout.bias_index]
        for block, size, patches in zip(layout.blocks, layout.part_sizes, self.patches):
            templates = w[block].reshape(layout.num_bins, size)
            total = total + np.einsum('nm,nm->n', omega, patches[select] @ templates.T)
        return total

    def accumulate(self, w: np.ndarray, indices: np.ndarray, coefs: np.ndarray) -> None:
        layout = self.layout
        weighted = self.omega[indices] * coefs[:, None]
        for block, size, patches in zip(layout.blocks, layout.part_sizes, self.patches):
            w[block] += (weighted.T @ patches[indices]).ravel()
        w[layout.precision_slice] += coefs @ self.deform[indices]
        w[layout.bias_index] += coefs.sum()
