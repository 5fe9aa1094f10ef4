"""
低分辨率特征 - 前景强度直方图与包围盒尺寸

动作节点的低分辨率子节点展开为 B + 2 个标量通道:
前 B 个通道是包围盒内 grid x grid 子区域的强度直方图（各子区域分别 L1 归一化），
最后两个通道是常数图 (w / H, h / H)，H 为帧高。
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.data_models import BoundingBox
from ..core.errors import SizeError
from .hog import to_gray


@dataclass(frozen=True, eq=False)
class LowResFeature:
    """强度直方图（B bins，L1 归一化）与尺度归一化的包围盒尺寸 (w, h)"""
    histogram: np.ndarray
    size: np.ndarray


def _check_box(frame: np.ndarray, box: BoundingBox) -> None:
    height, width = frame.shape
    if box.w <= 0 or box.h <= 0:
        raise SizeError(f"前景包围盒为空: {box.to_list()}")
    if box.x < 0 or box.y < 0 or box.x + box.w > width or box.y + box.h > height:
        raise SizeError(f"前景包围盒 {box.to_list()} 超出帧范围 {width}x{height}")


def full_frame_box(frame: np.ndarray) -> BoundingBox:
    height, width = np.asarray(frame).shape[:2]
    return BoundingBox(0, 0, width, height)


def intensity_histogram(pixels: np.ndarray, bins: int) -> np.ndarray:
    counts, _ = np.histogram(pixels, bins=bins, range=(0.0, 256.0))
    total = counts.sum()
    if total == 0:
        return np.zeros(bins)
    return counts / total


def compute_lowres(frame: np.ndarray, box: Optional[BoundingBox] = None, bins: int = 16) -> LowResFeature:
    """
    计算单帧低分辨率特征

    Args:
        frame: 图像（0-255）
        box: 前景包围盒，缺省为整帧
        bins: 强度直方图 bin 数

    Raises:
        SizeError: 包围盒为空或超出帧范围
    """
    frame = to_gray(frame)
    box = box or full_frame_box(frame)
    _check_box(frame, box)
    pixels = frame[box.y:box.y + box.h, box.x:box.x + box.w]
    return LowResFeature(
        histogram=intensity_histogram(pixels, bins),
        size=np.array([box.w / frame.shape[0], box.h / frame.shape[0]]),
    )


def lowres_maps(
    frame: np.ndarray,
    box: Optional[BoundingBox] = None,
    bins: int = 16,
    grid: int = 4,
) -> np.ndarray:
    """
    单帧低分辨率响应图 (B + 2, grid, grid)

    Raises:
        SizeError: 包围盒为空或超出帧范围
    """
    frame = to_gray(frame)
    box = box or full_frame_box(frame)
    feature = compute_lowres(frame, box, bins)

    maps = np.zeros((bins + 2, grid, grid))
    rows = np.floor(np.arange(grid + 1) * box.h / grid).astype(int) + box.y
    cols = np.floor(np.arange(grid + 1) * box.w / grid).astype(int) + box.x
    for i in range(grid):
        for j in range(grid):
            region = frame[rows[i]:rows[i + 1], cols[j]:cols[j + 1]]
            if region.size:
                maps[:bins, i, j] = intensity_histogram(region, bins)
    maps[bins] = feature.size[0]
    maps[bins + 1] = feature.size[1]
    return maps
