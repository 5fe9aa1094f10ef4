"""
广义距离变换

out(v0) = max_vi [child(vi) - (vi - v0 - mu)^T P (vi - v0 - mu)]，P 为 2D 偏移协方差的逆。

- diagonal: 丢弃协方差的非对角项（记录相关系数 |rho|），按行再按列做两次一维下包络
- exact: 剪切分解 -d^T P d = -a (dx + (b/a) dy)^2 - (c - b^2/a) dy^2，
  对每一对 (源行, 目标行) 在实数查询点上做一维下包络，结果与穷举完全一致

一维最大化在序列长度不超过 dense_limit 时用向量化穷举计算，否则用线性时间的下包络算法；
两条路径都是精确的。
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..geometry import OffsetGaussian2D


logger = logging.getLogger(__name__)

DEFAULT_DENSE_LIMIT = 32


@dataclass(frozen=True, eq=False)
class DistanceTransform:
    """变换后的得分图与每个根位置对应的最优子部件位置"""
    scores: np.ndarray
    arg_x: np.ndarray
    arg_y: np.ndarray


def envelope_max(values: np.ndarray, a: float, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    一维下包络: best(q) = max_p values[p] - a (p - q)^2

    Args:
        values: (n,) 源点 p = 0..n-1 上的取值
        a: 正的二次项系数
        queries: (m,) 任意实数查询点

    Returns:
        (best, arg)，arg 为取得最大值的源点
    """
    values = np.asarray(values, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    n = values.size
    # max_p values[p] - a (p - q)^2 = -a * min_p [f(p) + (p - q)^2]
    f = -values / a
    vertices = np.zeros(n, dtype=np.int64)
    bounds = np.empty(n + 1)
    bounds[0], bounds[1] = -np.inf, np.inf
    k = 0
    for p in range(1, n):
        while True:
            v = vertices[k]
            s = ((f[p] + p * p) - (f[v] + v * v)) / (2.0 * (p - v))
            if s > bounds[k]:
                break
            k -= 1
        k += 1
        vertices[k] = p
        bounds[k] = s
        bounds[k + 1] = np.inf

    order = np.argsort(queries, kind='stable')
    arg = np.empty(queries.size, dtype=np.int64)
    j = 0
    for index in order:
        q = queries[index]
        while bounds[j + 1] < q:
            j += 1
        arg[index] = vertices[j]
    best = values[arg] - a * (arg - queries) ** 2
    return best, arg


def _dense_max(values: np.ndarray, a: float, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """逐行穷举: values (R, n), queries (R, m) -> (R, m)"""
    positions = np.arange(values.shape[1], dtype=np.float64)
    candidates = values[:, None, :] - a * (positions[None, None, :] - queries[:, :, None]) ** 2
    arg = np.argmax(candidates, axis=2)
    best = np.take_along_axis(candidates, arg[..., None], axis=2)[..., 0]
    return best, arg


def rows_max(
    values: np.ndarray,
    a: float,
    queries: np.ndarray,
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> Tuple[np.ndarray, np.ndarray]:
    """对每一行做一维最大化: values (R, n), queries (R, m)"""
    values = np.asarray(values, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if values.shape[1] <= dense_limit:
        return _dense_max(values, a, queries)
    best = np.empty(queries.shape)
    arg = np.empty(queries.shape, dtype=np.int64)
    for row in range(values.shape[0]):
        best[row], arg[row] = envelope_max(values[row], a, queries[row])
    return best, arg


def _diagonal(child: np.ndarray, gaussian: OffsetGaussian2D, dense_limit: int) -> DistanceTransform:
    gaussian.precision  # 校验对称正定
    cov = gaussian.cov
    if cov[0, 1] != 0.0:
        logger.debug(f"距离变换丢弃非对角协方差项, |rho| = {abs(gaussian.correlation):.4f}")
    a, c = 1.0 / cov[0, 0], 1.0 / cov[1, 1]
    mu_x, mu_y = gaussian.mean
    height, width = child.shape

    row_queries = np.broadcast_to(np.arange(width) + mu_x, (height, width))
    row_best, row_arg = rows_max(child, a, row_queries, dense_limit)

    col_queries = np.broadcast_to(np.arange(height) + mu_y, (width, height))
    col_best, col_arg = rows_max(row_best.T, c, col_queries, dense_limit)

    scores = col_best.T
    arg_y = col_arg.T
    arg_x = np.take_along_axis(row_arg, arg_y, axis=0)
    return DistanceTransform(scores=scores, arg_x=arg_x, arg_y=arg_y)


def _exact(child: np.ndarray, gaussian: OffsetGaussian2D, dense_limit: int) -> DistanceTransform:
    precision = gaussian.precision
    a, b, c = precision[0, 0], precision[0, 1], precision[1, 1]
    residual = c - b * b / a
    mu_x, mu_y = gaussian.mean
    height, width = child.shape

    # dy[y0, yi] = yi - y0 - mu_y
    dy = np.arange(height)[None, :] - np.arange(height)[:, None] - mu_y
    queries = (
        np.arange(width)[None, None, :] + mu_x - (b / a) * dy[:, :, None]
    ).reshape(height * height, width)
    values = np.broadcast_to(child[None, :, :], (height, height, width)).reshape(height * height, width)
    inner, inner_arg = rows_max(values, a, queries, dense_limit)
    inner = inner.reshape(height, height, width) - residual * (dy ** 2)[:, :, None]
    inner_arg = inner_arg.reshape(height, height, width)

    arg_y = np.argmax(inner, axis=1)
    scores = np.take_along_axis(inner, arg_y[:, None, :], axis=1)[:, 0, :]
    arg_x = np.take_along_axis(inner_arg, arg_y[:, None, :], axis=1)[:, 0, :]
    return DistanceTransform(scores=scores, arg_x=arg_x, arg_y=arg_y)


def distance_transform(
    child: np.ndarray,
    gaussian: OffsetGaussian2D,
    method: str = 'diagonal',
    dense_limit: int = DEFAULT_DENSE_LIMIT,
) -> DistanceTransform:
    """
    对子部件响应图做广义距离变换

    Args:
        child: (H, W) 子部件响应图，按 [y, x] 索引
        gaussian: 投影后的 2D 偏移高斯（网格单位）
        method: 'diagonal' 或 'exact'
        dense_limit: 一维序列长度不超过该值时用向量化穷举

    Returns:
        DistanceTransform，scores[y0, x0] 为根部件位于 (x0, y0) 时的最优子部件得分，
        (arg_x, arg_y) 为对应的子部件位置

    Raises:
        NumericError: 协方差非对称正定
    """
    child = np.asarray(child, dtype=np.float64)
    if method == 'exact':
        return _exact(child, gaussian, dense_limit)
    if method == 'diagonal':
        return _diagonal(child, gaussian, dense_limit)
    raise ValueError(f"未知的距离变换方法: {method}")
