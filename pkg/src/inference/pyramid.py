"""
时空金字塔最大池化

视频体 (t, y, x) 在三个层级上划分为 1、2x2x2、4x4x4 个单元，每个单元取最大响应，
拼接成 1 + 8 + 64 = 73 维向量。单元边界为 floor(i * n / k)；空单元取全局最小值。
"""

import logging
from typing import Sequence

import numpy as np

from ..aog import PYRAMID_DIM
from ..core.errors import EmptyInputError
from ..features import pixel_to_grid
from .response import FILL_SCORE, ResponseMap, valid_mask


logger = logging.getLogger(__name__)

PYRAMID_LEVELS = (1, 2, 4)
MIN_FRAMES = 4


def _bounds(n: int, k: int) -> np.ndarray:
    return (np.arange(k + 1) * n) // k


def pyramid_pool(maps: Sequence[np.ndarray]) -> np.ndarray:
    """
    把逐帧得分图池化为 73 维金字塔

    Args:
        maps: 逐帧 (H, W) 得分图，FILL_SCORE 表示无效位置

    Returns:
        (73,) 向量，顺序为层级 0、层级 1、层级 2，每层内按 (t, y, x) 展开

    Raises:
        EmptyInputError: 帧序列为空
    """
    if len(maps) == 0:
        raise EmptyInputError("金字塔池化需要至少一帧")
    volume = np.stack([np.asarray(m, dtype=np.float64) for m in maps])
    if volume.shape[0] < MIN_FRAMES:
        pad = np.repeat(volume[-1:], MIN_FRAMES - volume.shape[0], axis=0)
        volume = np.concatenate([volume, pad])

    volume = np.where(valid_mask(volume), volume, -np.inf)
    finite = volume[np.isfinite(volume)]
    if finite.size == 0:
        logger.warning("池化输入没有有效位置, 金字塔置零")
        return np.zeros(PYRAMID_DIM)
    floor = finite.min()

    entries = []
    t_len, h_len, w_len = volume.shape
    for k in PYRAMID_LEVELS:
        tb, yb, xb = _bounds(t_len, k), _bounds(h_len, k), _bounds(w_len, k)
        for i in range(k):
            for j in range(k):
                for l in range(k):
                    cell = volume[tb[i]:tb[i + 1], yb[j]:yb[j + 1], xb[l]:xb[l + 1]]
                    value = cell.max() if cell.size else -np.inf
                    entries.append(value if np.isfinite(value) else floor)
    return np.asarray(entries)


def collapse_scales(response: ResponseMap, base_grid) -> np.ndarray:
    """
    把多尺度得分图按最近邻最大值折叠到原尺度网格

    尺度 s 的网格元素 g 的中心像素为 (g + 1) * cell / s，对应原尺度网格索引 (g + 1) / s - 1。
    """
    out = np.full(tuple(base_grid), FILL_SCORE)
    cell = response.cell_size
    for scores, scale in zip(response.levels, response.scales):
        ys = np.rint(pixel_to_grid((np.arange(scores.shape[0]) + 1.0) * cell / scale, 1.0, cell)).astype(int)
        xs = np.rint(pixel_to_grid((np.arange(scores.shape[1]) + 1.0) * cell / scale, 1.0, cell)).astype(int)
        ys = np.clip(ys, 0, base_grid[0] - 1)
        xs = np.clip(xs, 0, base_grid[1] - 1)
        np.maximum.at(out, (ys[:, None], xs[None, :]), scores)
    return out


def standardize(scores: np.ndarray, mean: float, std: float) -> np.ndarray:
    """z 分数标准化，无效位置保持 FILL_SCORE"""
    valid = valid_mask(scores)
    out = np.full(scores.shape, FILL_SCORE)
    out[valid] = (scores[valid] - mean) / std
    return out
