"""
部件响应图

把插值后的外观 / 运动模板与每个尺度的 HOG / HOF 网格做互相关。
响应图按窗口中心网格元素 [y, x] 索引并填充到整个特征网格，窗口放不下的位置为 FILL_SCORE。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..aog import PartModel, angular_distance, interp_weights, view_bin_centers, window_anchor, window_patches
from ..features import FrameFeatures


logger = logging.getLogger(__name__)

FILL_SCORE = -1e6


@dataclass(frozen=True, eq=False)
class ResponseMap:
    """多尺度得分网格；模板大于特征网格的尺度被省略"""
    levels: Tuple[np.ndarray, ...]
    scales: Tuple[float, ...]
    cell_size: int

    def __post_init__(self):
        if len(self.levels) != len(self.scales):
            raise ValueError("响应图层数与尺度数不一致")

    @property
    def num_levels(self) -> int:
        return len(self.levels)


def valid_mask(scores: np.ndarray) -> np.ndarray:
    return scores > 0.5 * FILL_SCORE


def pad_to_grid(valid: np.ndarray, window: Sequence[int], grid: Tuple[int, int]) -> np.ndarray:
    """把左上角索引的 (rows, cols, ...) 结果放到中心索引的完整网格上"""
    ax, ay = window_anchor(window)
    out = np.full(tuple(grid) + valid.shape[2:], FILL_SCORE)
    out[ay:ay + valid.shape[0], ax:ax + valid.shape[1]] = valid
    return out


def raw_part_responses(stacked: np.ndarray, part: PartModel) -> Optional[np.ndarray]:
    """
    每个视角 bin 模板各自的响应 (G_h, G_w, M)，未插值

    Returns:
        None 表示窗口大于该尺度的特征网格
    """
    h, w = part.window
    if stacked.shape[0] < h or stacked.shape[1] < w:
        return None
    patches = window_patches(stacked, part.window)
    responses = patches @ part.stacked_templates.T
    return pad_to_grid(responses, part.window, stacked.shape[:2])


def bin_responses(stacked: np.ndarray, part: PartModel, bin_weights: np.ndarray) -> Optional[np.ndarray]:
    """
    各视角 bin 下插值后的响应 (G_h, G_w, M)

    bin_weights: (M, M)，第 m 行为 theta = theta_m 时的插值权重
    """
    raw = raw_part_responses(stacked, part)
    if raw is None:
        return None
    mixed = raw @ bin_weights.T
    mixed[~valid_mask(raw[..., 0])] = FILL_SCORE
    return mixed


def part_response(
    features: FrameFeatures,
    part: PartModel,
    theta: float,
    view_centers: Optional[Sequence[float]] = None,
    share_views: bool = True,
) -> ResponseMap:
    """
    部件在视角 theta 下的多尺度响应图

    外观模板与运动模板按同一组插值权重组合，分别与 HOG / HOF 通道做互相关后相加。
    """
    centers = view_bin_centers(part.num_bins) if view_centers is None else np.asarray(view_centers)
    if share_views:
        weights = interp_weights(theta, centers)
    else:
        weights = np.zeros(centers.size)
        weights[int(np.argmin(angular_distance(theta, centers)))] = 1.0

    levels, scales = [], []
    for level in features.levels:
        raw = raw_part_responses(level.stacked, part)
        if raw is None:
            logger.debug(f"部件 {part.part_id} 的窗口大于尺度 {level.scale:.3f} 的网格 {level.grid_shape}, 跳过")
            continue
        scores = raw @ weights
        scores[~valid_mask(raw[..., 0])] = FILL_SCORE
        levels.append(scores)
        scales.append(level.scale)
    return ResponseMap(levels=tuple(levels), scales=tuple(scales), cell_size=features.cell_size)
