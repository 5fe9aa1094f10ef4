"""
稠密光流 - 由粗到细的 Horn-Schunck 变分方法

约定: 光流 (u, v) 满足 frame_t1(x + u, y + v) ~= frame_t(x, y)，
即内容向右移动 2 像素时 u = +2。
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

from ..core.errors import SizeError
from .hog import to_gray


logger = logging.getLogger(__name__)

# Horn-Schunck 邻域平均核
_AVERAGE_KERNEL = np.array([
    [1.0 / 12, 1.0 / 6, 1.0 / 12],
    [1.0 / 6, 0.0, 1.0 / 6],
    [1.0 / 12, 1.0 / 6, 1.0 / 12],
])

_MIN_LEVEL_SIZE = 16


@dataclass(frozen=True, eq=False)
class FlowField:
    """逐像素光流 (像素 / 帧)"""
    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self):
        return self.u.shape

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    @classmethod
    def zeros(cls, shape) -> 'FlowField':
        return cls(u=np.zeros(shape), v=np.zeros(shape))

    def resized(self, shape) -> 'FlowField':
        """重采样到新的图像尺寸，位移随尺度同比缩放"""
        if tuple(shape) == tuple(self.shape):
            return self
        fy = shape[0] / self.shape[0]
        fx = shape[1] / self.shape[1]
        u = _resize(self.u, shape) * fx
        v = _resize(self.v, shape) * fy
        return FlowField(u=u, v=v)


def _resize(image: np.ndarray, shape) -> np.ndarray:
    zoom = (shape[0] / image.shape[0], shape[1] / image.shape[1])
    resized = ndimage.zoom(image, zoom, order=1, mode='nearest')
    return resized[:shape[0], :shape[1]]


def _image_pyramid(frame: np.ndarray, levels: int) -> List[np.ndarray]:
    pyramid = [frame]
    for _ in range(levels - 1):
        current = pyramid[-1]
        if min(current.shape) // 2 < _MIN_LEVEL_SIZE:
            break
        smoothed = ndimage.gaussian_filter(current, sigma=1.0, mode='nearest')
        pyramid.append(smoothed[::2, ::2])
    return pyramid


def _warp(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """采样 image(x + u, y + v)"""
    rows, cols = np.mgrid[0:image.shape[0], 0:image.shape[1]].astype(np.float64)
    return ndimage.map_coordinates(image, [rows + v, cols + u], order=1, mode='nearest')


def _horn_schunck_level(
    first: np.ndarray,
    second: np.ndarray,
    u0: np.ndarray,
    v0: np.ndarray,
    alpha: float,
    iterations: int,
):
    """在一层上以 (u0, v0) 为线性化点迭代求解"""
    if np.any(u0) or np.any(v0):
        warped = _warp(second, u0, v0)
    else:
        warped = second

    gy0, gx0 = np.gradient(first)
    gy1, gx1 = np.gradient(warped)
    ix = 0.5 * (gx0 + gx1)
    iy = 0.5 * (gy0 + gy1)
    it = warped - first

    # 线性化约束: ix * u + iy * v + (it - ix * u0 - iy * v0) = 0
    residual = it - ix * u0 - iy * v0
    denom = alpha ** 2 + ix ** 2 + iy ** 2

    u, v = u0.copy(), v0.copy()
    for _ in range(iterations):
        u_avg = ndimage.convolve(u, _AVERAGE_KERNEL, mode='nearest')
        v_avg = ndimage.convolve(v, _AVERAGE_KERNEL, mode='nearest')
        update = (ix * u_avg + iy * v_avg + residual) / denom
        u = u_avg - ix * update
        v = v_avg - iy * update
    return u, v


def compute_flow(
    frame_t: np.ndarray,
    frame_t1: np.ndarray,
    alpha: float = 10.0,
    iterations: int = 100,
    levels: int = 3,
    max_flow: float = 32.0,
) -> FlowField:
    """
    计算两帧之间的稠密光流

    Args:
        frame_t: 当前帧
        frame_t1: 下一帧
        alpha: 平滑项权重
        iterations: 每层迭代次数
        levels: 金字塔层数（最粗层边长不小于 16 像素）
        max_flow: 光流幅值上限

    Returns:
        FlowField，尺寸与输入帧相同，所有值有限且幅值 <= max_flow

    Raises:
        SizeError: 两帧尺寸不一致
    """
    first = to_gray(frame_t)
    second = to_gray(frame_t1)
    if first.shape != second.shape:
        raise SizeError(f"光流输入帧尺寸不一致: {first.shape} vs {second.shape}")
    if np.array_equal(first, second):
        return FlowField.zeros(first.shape)

    pyramid_first = _image_pyramid(first, levels)
    pyramid_second = _image_pyramid(second, levels)

    u = np.zeros(pyramid_first[-1].shape)
    v = np.zeros(pyramid_first[-1].shape)
    for level in range(len(pyramid_first) - 1, -1, -1):
        shape = pyramid_first[level].shape
        if u.shape != shape:
            upsampled = FlowField(u=u, v=v).resized(shape)
            u, v = upsampled.u, upsampled.v
        u, v = _horn_schunck_level(
            pyramid_first[level], pyramid_second[level], u, v, alpha, iterations,
        )

    u = np.nan_to_num(u, nan=0.0, posinf=0.0, neginf=0.0)
    v = np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)
    magnitude = np.hypot(u, v)
    scale = np.where(magnitude > max_flow, max_flow / np.maximum(magnitude, 1e-12), 1.0)
    return FlowField(u=u * scale, v=v * scale)
