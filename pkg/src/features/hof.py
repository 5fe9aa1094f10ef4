"""
HOF 特征 - 光流方向直方图

每个像素的光流方向按 360 / hof_bins 度等分（bin 以 0 度为中心，0 度 = 向右），
幅值低于阈值的像素计入额外的静止 bin。单元格统计像素个数，块结构与 HOG 相同。
"""

import numpy as np

from ..core.errors import SizeError
from .flow import FlowField
from .hog import FeatureMap, block_normalize, cell_histogram, check_frame_size


def flow_bins(flow: FlowField, bins: int = 8, motion_threshold: float = 0.25) -> np.ndarray:
    """每个像素的 bin 索引，静止像素的索引为 bins"""
    angle = np.arctan2(flow.v, flow.u)
    index = np.mod(np.rint(angle / (2.0 * np.pi / bins)).astype(np.int64), bins)
    return np.where(flow.magnitude < motion_threshold, bins, index)


def compute_hof(
    flow: FlowField,
    cell: int = 8,
    bins: int = 8,
    motion_threshold: float = 0.25,
    eps: float = 1e-4,
) -> FeatureMap:
    """
    计算 HOF 特征图

    Returns:
        FeatureMap，网格与同尺寸帧的 HOG 相同，D = 4 * (bins + 1)

    Raises:
        SizeError: 光流场小于一个块
    """
    if flow.u.size == 0:
        raise SizeError("光流场为空")
    cells_h, cells_w = check_frame_size(flow.shape, cell)
    index = flow_bins(flow, bins, motion_threshold)[:cells_h * cell, :cells_w * cell]
    cells = cell_histogram(index, np.ones(index.shape), cell, bins + 1)
    return FeatureMap(
        descriptors=block_normalize(cells, eps),
        cell_size=cell,
        kind='hof',
        cell_histograms=cells,
    )
