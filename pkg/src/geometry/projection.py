"""
缩放正交投影

视角只用绕竖直轴 (y) 的旋转角 theta 描述，仰角固定:

    Q(theta) = [[k1 cos(theta), 0, -k1 sin(theta)],
                [0,             k2, 0            ]]

所有部件共用同一个视角投影矩阵。
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..core.errors import SizeError, UnderdeterminedError


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
_RANK_EPS = 1e-12


def wrap_angle(theta: float) -> float:
    """把角度规约到 [0, 2pi)"""
    wrapped = float(np.mod(theta, TWO_PI))
    return 0.0 if wrapped >= TWO_PI else wrapped


@dataclass(frozen=True)
class ProjectionParams:
    """投影参数: 两个方向的缩放因子（像素 / 归一化单位）与视角"""
    k1: float
    k2: float
    theta: float
    residual: float = 0.0

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError(f"缩放因子必须为正数: k1={self.k1}, k2={self.k2}")
        object.__setattr__(self, 'theta', wrap_angle(self.theta))

    def to_dict(self) -> dict:
        return {'k1': self.k1, 'k2': self.k2, 'theta': self.theta, 'residual': self.residual}

    @classmethod
    def from_dict(cls, data: dict) -> 'ProjectionParams':
        return cls(
            k1=float(data['k1']),
            k2=float(data['k2']),
            theta=float(data['theta']),
            residual=float(data.get('residual', 0.0)),
        )


def projection_matrix(params: ProjectionParams) -> np.ndarray:
    """返回 2x3 缩放正交投影矩阵"""
    return rotation_projection(params.theta, params.k1, params.k2)


def rotation_projection(theta: float, k1: float = 1.0, k2: float = 1.0) -> np.ndarray:
    """不做参数校验的投影矩阵，供内部按视角 bin 批量调用"""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([
        [k1 * c, 0.0, -k1 * s],
        [0.0, k2, 0.0],
    ])


def _check_correspondences(points3d: np.ndarray, points2d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    points3d = np.asarray(points3d, dtype=np.float64).reshape(-1, 3)
    points2d = np.asarray(points2d, dtype=np.float64).reshape(-1, 2)
    if len(points3d) != len(points2d):
        raise SizeError(f"3D/2D 对应点数量不一致: {len(points3d)} vs {len(points2d)}")
    if len(points3d) < 2:
        raise UnderdeterminedError(f"至少需要 2 对对应点, 得到 {len(points3d)}")
    return points3d, points2d


def fit_projection(points3d, points2d, theta: float) -> ProjectionParams:
    """
    给定视角，最小二乘拟合缩放因子

    两行相互独立:
        u = k1 * (cos(theta) x - sin(theta) z)
        v = k2 * y

    Args:
        points3d: (n, 3) 3D 点
        points2d: (n, 2) 对应的 2D 点
        theta: 视角（弧度）

    Returns:
        ProjectionParams，residual 为均方根重投影误差

    Raises:
        UnderdeterminedError: 旋转后的 x 分量或 y 分量全为零
    """
    points3d, points2d = _check_correspondences(points3d, points2d)
    c, s = np.cos(theta), np.sin(theta)
    a = c * points3d[:, 0] - s * points3d[:, 2]
    y = points3d[:, 1]

    aa = float(a @ a)
    yy = float(y @ y)
    if aa < _RANK_EPS or yy < _RANK_EPS:
        raise UnderdeterminedError(
            "投影拟合欠定: 旋转后的水平分量或竖直分量没有变化",
            details=f"sum(a^2)={aa:.3g}, sum(y^2)={yy:.3g}, theta={theta:.4f}",
        )

    k1 = float(a @ points2d[:, 0]) / aa
    k2 = float(y @ points2d[:, 1]) / yy
    if k1 <= 0 or k2 <= 0:
        raise UnderdeterminedError(
            f"投影拟合得到非正缩放因子 (k1={k1:.4g}, k2={k2:.4g})，视角可能相差 pi"
        )

    predicted = np.stack([k1 * a, k2 * y], axis=1)
    residual = float(np.sqrt(np.mean(np.sum((predicted - points2d) ** 2, axis=1))))
    return ProjectionParams(k1=k1, k2=k2, theta=theta, residual=residual)


def fit_view_angle(points3d, points2d) -> ProjectionParams:
    """
    同时估计视角与缩放因子

    水平行 u = k1 * [x, z] . (cos(theta), -sin(theta))，因此 d = k1 * (cos, -sin)
    就是 u 对 [x, z] 的最小二乘解；要求 k1 > 0，theta 由 d 的方向唯一确定。

    Raises:
        UnderdeterminedError: x/z 坐标退化（所有点共线于视线方向）
    """
    points3d, points2d = _check_correspondences(points3d, points2d)
    design = points3d[:, [0, 2]]
    gram = design.T @ design
    if np.linalg.matrix_rank(gram, tol=_RANK_EPS) < 2:
        raise UnderdeterminedError(
            "无法估计视角: 对应点的水平坐标 (x, z) 退化",
            details=f"gram={gram.tolist()}",
        )
    d = np.linalg.solve(gram, design.T @ points2d[:, 0])
    theta = float(np.arctan2(-d[1], d[0]))
    return fit_projection(points3d, points2d, theta)
