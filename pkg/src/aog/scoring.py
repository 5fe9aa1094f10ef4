"""
AND-OR 图得分函数

部件得分为各视角 bin 模板响应的指数加权凸组合；视角得分对部件得分与形变得分求和；
姿态得分在视角 bin 与子部件位置上取最大；动作得分为池化金字塔的线性函数。
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.errors import SizeError
from ..geometry import TWO_PI, deformation_score
from .nodes import PYRAMID_DIM, ActionModel, PartModel, PoseModel, view_bin_centers, window_anchor


logger = logging.getLogger(__name__)


# ============================================================================
# 视角插值
# ============================================================================

def angular_distance(theta, theta_m):
    """回绕角距离 min(|d|, 2pi - |d|)"""
    delta = np.mod(np.abs(np.asarray(theta, dtype=np.float64) - theta_m), TWO_PI)
    return np.minimum(delta, TWO_PI - delta)


def interp_weight(theta: float, theta_m: float) -> float:
    """exp(-d(theta, theta_m)^2)"""
    return float(np.exp(-angular_distance(theta, theta_m) ** 2))


def interp_weights(theta: float, centers: Sequence[float]) -> np.ndarray:
    """对所有 bin 中心的归一化插值权重"""
    weights = np.exp(-angular_distance(theta, np.asarray(centers, dtype=np.float64)) ** 2)
    return weights / weights.sum()


def _bin_weights(part: PartModel, theta: float, view_centers, share_views: bool) -> np.ndarray:
    centers = view_bin_centers(part.num_bins) if view_centers is None else np.asarray(view_centers)
    if centers.size != part.num_bins:
        raise SizeError(f"视角中心数 {centers.size} 与模板数 {part.num_bins} 不一致")
    if share_views:
        return interp_weights(theta, centers)
    weights = np.zeros(centers.size)
    weights[int(np.argmin(angular_distance(theta, centers)))] = 1.0
    return weights


def _template_responses(patch: np.ndarray, templates: np.ndarray, what: str) -> np.ndarray:
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != templates.shape[1:]:
        raise SizeError(f"{what}特征块尺寸 {patch.shape} 与模板尺寸 {templates.shape[1:]} 不一致")
    return templates.reshape(templates.shape[0], -1) @ patch.ravel()


# ============================================================================
# 部件 / 视角 / 姿态 / 动作得分
# ============================================================================

def part_appearance_score(
    feat: np.ndarray,
    part: PartModel,
    theta: float,
    view_centers: Optional[Sequence[float]] = None,
    share_views: bool = True,
) -> float:
    """
    外观得分: sum_m w_m (phi_m . feat) / sum_m w_m

    Raises:
        SizeError: 特征块尺寸与模板不一致
    """
    weights = _bin_weights(part, theta, view_centers, share_views)
    return float(weights @ _template_responses(feat, part.app_templates, 'HOG '))


def part_motion_score(
    feat: np.ndarray,
    part: PartModel,
    theta: float,
    view_centers: Optional[Sequence[float]] = None,
    share_views: bool = True,
) -> float:
    weights = _bin_weights(part, theta, view_centers, share_views)
    return float(weights @ _template_responses(feat, part.mot_templates, 'HOF '))


def part_score(
    feat_app: np.ndarray,
    feat_mot: np.ndarray,
    part: PartModel,
    theta: float,
    view_centers: Optional[Sequence[float]] = None,
    share_views: bool = True,
) -> float:
    """部件得分 = 外观得分 + 运动得分"""
    return (
        part_appearance_score(feat_app, part, theta, view_centers, share_views)
        + part_motion_score(feat_mot, part, theta, view_centers, share_views)
    )


def extract_patch(stacked: np.ndarray, location: Sequence[int], window: Sequence[int]) -> np.ndarray:
    """
    取以 location = (x, y) 为窗口中心的特征块 (h, w, D)

    Raises:
        SizeError: 窗口超出网格
    """
    h, w = window
    ax, ay = window_anchor(window)
    x0, y0 = int(location[0]) - ax, int(location[1]) - ay
    if x0 < 0 or y0 < 0 or y0 + h > stacked.shape[0] or x0 + w > stacked.shape[1]:
        raise SizeError(f"位置 {tuple(location)} 的 {h}x{w} 窗口超出网格 {stacked.shape[:2]}")
    return np.asarray(stacked[y0:y0 + h, x0:x0 + w], dtype=np.float64)


def window_patches(stacked: np.ndarray, window: Sequence[int]) -> np.ndarray:
    """
    所有可放置窗口的展开特征块

    Returns:
        (G_h - h + 1, G_w - w + 1, h * w * D)，第 (r, c) 项是左上角在 (r, c) 的窗口，
        展开顺序与 PartModel.stacked_templates 一致
    """
    h, w = window
    if stacked.shape[0] < h or stacked.shape[1] < w:
        return np.zeros((0, 0, h * w * stacked.shape[2]))
    view = sliding_window_view(np.asarray(stacked, dtype=np.float64), (h, w), axis=(0, 1))
    # (rows, cols, D, h, w) -> (rows, cols, h, w, D)
    view = np.moveaxis(view, 2, 4)
    return view.reshape(view.shape[0], view.shape[1], -1)


def view_score(
    locations: Sequence[Sequence[int]],
    stacked: np.ndarray,
    pose: PoseModel,
    theta: float,
) -> float:
    """
    视角节点得分: 各部件得分 + 子部件形变得分 + 偏置

    Args:
        locations: N + 1 个部件位置 (x, y)，第一个为根部件
        stacked: 单个尺度的拼接特征 (G_h, G_w, D_hog + D_hof)
        pose: 姿态模型
        theta: 视角（弧度）
    """
    if len(locations) != len(pose.parts):
        raise SizeError(f"需要 {len(pose.parts)} 个部件位置, 得到 {len(locations)}")
    total = pose.bias
    for part, location in zip(pose.parts, locations):
        patch = extract_patch(stacked, location, part.window)
        total += part_score(
            patch[..., :part.app_dim], patch[..., part.app_dim:], part, theta,
            pose.view_centers, pose.share_views,
        )
    root = np.asarray(locations[0], dtype=np.float64)
    for gaussian, location in zip(pose.projected_offsets(theta), locations[1:]):
        total += deformation_score(root, location, gaussian)
    return float(total)


@dataclass(frozen=True)
class PoseScore:
    """姿态得分及其最大化配置"""
    score: float
    view_bin: int
    theta: float
    locations: Tuple[Tuple[int, int], ...]


def _valid_centers(window: Sequence[int], grid: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    h, w = window
    ax, ay = window_anchor(window)
    xs = np.arange(grid[1] - w + 1) + ax
    ys = np.arange(grid[0] - h + 1) + ay
    return xs, ys


def pose_score(root_location: Sequence[int], stacked: np.ndarray, pose: PoseModel) -> PoseScore:
    """
    姿态节点得分: 在所有视角 bin 与所有合法子部件位置上取视角得分的最大值

    子部件位置逐一穷举，用于验证距离变换的结果；检测时使用 inference.detect_poses。
    得分相同时取较小的 bin 与网格中先出现的位置。
    """
    root_location = (int(root_location[0]), int(root_location[1]))
    root_patch = extract_patch(stacked, root_location, pose.root.window)
    grid = stacked.shape[:2]
    child_patches = [window_patches(stacked, child.window) for child in pose.children]

    best: Optional[PoseScore] = None
    for m, theta in enumerate(pose.view_centers):
        weights = pose.view_weights(theta)
        total = pose.bias + float(weights @ (pose.root.stacked_templates @ root_patch.ravel()))
        locations: List[Tuple[int, int]] = [root_location]
        for child, patches, gaussian in zip(pose.children, child_patches, pose.projected_offsets(theta)):
            xs, ys = _valid_centers(child.window, grid)
            if xs.size == 0 or ys.size == 0:
                raise SizeError(f"子部件 {child.part_id} 的窗口大于特征网格 {grid}")
            appearance = (patches @ child.stacked_templates.T) @ weights
            dx = xs[None, :] - root_location[0] - gaussian.mean[0]
            dy = ys[:, None] - root_location[1] - gaussian.mean[1]
            precision = gaussian.precision
            deformation = -(
                precision[0, 0] * dx ** 2 + precision[1, 1] * dy ** 2 + 2.0 * precision[0, 1] * dx * dy
            )
            candidates = appearance + deformation
            row, col = np.unravel_index(int(np.argmax(candidates)), candidates.shape)
            total += float(candidates[row, col])
            locations.append((int(xs[col]), int(ys[row])))
        if best is None or total > best.score:
            best = PoseScore(score=total, view_bin=m, theta=float(theta), locations=tuple(locations))
    return best


def action_score(
    pose_pyramids: Sequence[np.ndarray],
    lowres_pyramids: Sequence[np.ndarray],
    action: ActionModel,
) -> float:
    """
    动作节点得分: w . [P_1 .. P_Np, L_1 .. L_Nl] + b

    Raises:
        SizeError: 金字塔数量或维度不一致
    """
    if len(pose_pyramids) != len(action.pose_ids) or len(lowres_pyramids) != action.num_lowres:
        raise SizeError(
            f"动作 {action.label} 需要 {len(action.pose_ids)} 个姿态金字塔和 {action.num_lowres} 个低分辨率金字塔, "
            f"得到 {len(pose_pyramids)} 和 {len(lowres_pyramids)}"
        )
    vectors = [np.asarray(p, dtype=np.float64).ravel() for p in list(pose_pyramids) + list(lowres_pyramids)]
    for vector in vectors:
        if vector.size != PYRAMID_DIM:
            raise SizeError(f"金字塔维度应为 {PYRAMID_DIM}, 得到 {vector.size}")
    features = np.concatenate(vectors) if vectors else np.zeros(0)
    return float(action.weights @ features + action.bias)
