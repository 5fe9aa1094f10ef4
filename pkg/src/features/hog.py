"""
HOG 特征

- 中心差分梯度，无符号方向 [0, pi) 均分为 hog_bins 个 bin，硬分配，按梯度幅值累加
- cell_size x cell_size 像素的单元格直方图
- 2x2 单元格块，步长一个单元格，块向量 v / sqrt(|v|^2 + eps^2) 归一化（范数 < 1）
- 输出网格的第 (i, j) 个元素是左上角单元格为 (i, j) 的块描述子，
  因此网格尺寸 = floor(frame / cell) - 1
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core.errors import SizeError


BLOCK_CELLS = 2


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """
    稠密特征网格

    descriptors: (grid_h, grid_w, D) 块归一化描述子
    cell_histograms: (cells_h, cells_w, bins) 归一化前的单元格直方图
    """
    descriptors: np.ndarray
    cell_size: int
    kind: str = 'hog'
    cell_histograms: Optional[np.ndarray] = None

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.descriptors.shape[0], self.descriptors.shape[1]

    @property
    def channels(self) -> int:
        return self.descriptors.shape[2]


def to_gray(frame: np.ndarray) -> np.ndarray:
    """灰度化（RGB 取三通道均值）"""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 3:
        frame = frame.mean(axis=2)
    if frame.ndim != 2:
        raise SizeError(f"帧必须是二维灰度图或 RGB 图, 得到形状 {frame.shape}")
    return frame


def check_frame_size(shape: Tuple[int, int], cell: int) -> Tuple[int, int]:
    """检查帧至少容纳一个块，返回单元格网格尺寸"""
    height, width = shape
    if height < BLOCK_CELLS * cell or width < BLOCK_CELLS * cell:
        raise SizeError(
            f"帧尺寸 {width}x{height} 小于一个 {BLOCK_CELLS}x{BLOCK_CELLS} 单元格块 "
            f"(cell={cell} 像素)"
        )
    return height // cell, width // cell


def image_gradients(frame: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """中心差分梯度，边界像素梯度为零"""
    gx = np.zeros_like(frame)
    gy = np.zeros_like(frame)
    gx[:, 1:-1] = frame[:, 2:] - frame[:, :-2]
    gy[1:-1, :] = frame[2:, :] - frame[:-2, :]
    return gx, gy


def cell_histogram(bin_index: np.ndarray, weight: np.ndarray, cell: int, bins: int) -> np.ndarray:
    """按单元格累加硬分配直方图，bin_index/weight 已裁剪到整数个单元格"""
    cells_h = bin_index.shape[0] // cell
    cells_w = bin_index.shape[1] // cell
    one_hot = np.zeros(bin_index.shape + (bins,))
    np.put_along_axis(one_hot, bin_index[..., None], weight[..., None], axis=2)
    return one_hot.reshape(cells_h, cell, cells_w, cell, bins).sum(axis=(1, 3))


def block_normalize(cells: np.ndarray, eps: float) -> np.ndarray:
    """2x2 单元格块拼接并做 L2 归一化，返回 (cells_h-1, cells_w-1, 4*bins)"""
    blocks = np.concatenate([
        cells[:-1, :-1],
        cells[:-1, 1:],
        cells[1:, :-1],
        cells[1:, 1:],
    ], axis=2)
    norms = np.sqrt(np.sum(blocks ** 2, axis=2, keepdims=True) + eps ** 2)
    return blocks / norms


def compute_hog(frame: np.ndarray, cell: int = 8, bins: int = 9, eps: float = 1e-4) -> FeatureMap:
    """
    计算 HOG 特征图

    Args:
        frame: 灰度 (H, W) 或 RGB (H, W, 3) 图像
        cell: 单元格像素数
        bins: 无符号方向 bin 数
        eps: 块归一化 epsilon

    Returns:
        FeatureMap，网格 (H//cell - 1, W//cell - 1)，D = 4 * bins

    Raises:
        SizeError: 帧小于一个块
    """
    frame = to_gray(frame)
    cells_h, cells_w = check_frame_size(frame.shape, cell)

    gx, gy = image_gradients(frame)
    gx = gx[:cells_h * cell, :cells_w * cell]
    gy = gy[:cells_h * cell, :cells_w * cell]

    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    bin_index = np.minimum((angle / (np.pi / bins)).astype(np.int64), bins - 1)

    cells = cell_histogram(bin_index, magnitude, cell, bins)
    return FeatureMap(
        descriptors=block_normalize(cells, eps),
        cell_size=cell,
        kind='hog',
        cell_histograms=cells,
    )
