"""
骨架归一化

归一化后的骨架与绝对位置、初始朝向、身体尺寸无关:
- 平移: 髋中心位于原点
- 旋转: 首帧肩轴（左肩 -> 右肩）绕竖直轴旋转到 +x 方向
- 尺度: 躯干长度 |颈 - 髋中心| = 1

朝向只取首帧，序列内部的转身（如绕圈行走）会被保留。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .data_models import JointIndex, Skeleton3D
from .errors import DegenerateSkeletonError, EmptyInputError


logger = logging.getLogger(__name__)

_EPS = 1e-12

_REFERENCE_JOINTS = (
    JointIndex.HIP_CENTER,
    JointIndex.NECK,
    JointIndex.L_SHOULDER,
    JointIndex.R_SHOULDER,
)


def yaw_matrix(angle: float) -> np.ndarray:
    """
    绕竖直轴 (y) 的旋转矩阵

    x' = cos(a) x - sin(a) z,  z' = sin(a) x + cos(a) z
    与缩放正交投影矩阵第一行的符号约定一致。
    """
    c, s = np.cos(angle), np.sin(angle)
    return np.array([
        [c, 0.0, -s],
        [0.0, 1.0, 0.0],
        [s, 0.0, c],
    ])


@dataclass(frozen=True)
class NormalizationFrame:
    """归一化参数: 根位置、朝向角（即视角 theta）、躯干长度"""
    root: np.ndarray
    yaw: float
    scale: float

    def apply(self, skeleton: Skeleton3D) -> Skeleton3D:
        inverse = yaw_matrix(self.yaw).T
        positions = (skeleton.positions - self.root) @ inverse.T / self.scale
        motions = skeleton.motions @ inverse.T / self.scale
        return skeleton.with_arrays(positions, motions)


def normalization_frame(reference: Skeleton3D) -> NormalizationFrame:
    """
    由参考帧计算归一化参数

    Raises:
        DegenerateSkeletonError: 参考关节不可见、躯干长度为零或无法确定朝向
    """
    hidden = [JointIndex(j).name.lower() for j in _REFERENCE_JOINTS if not reference.visible[j]]
    if hidden:
        raise DegenerateSkeletonError(f"参考关节不可见: {', '.join(hidden)}")

    root = reference.positions[JointIndex.HIP_CENTER].copy()
    torso = float(np.linalg.norm(reference.positions[JointIndex.NECK] - root))
    if torso < _EPS:
        raise DegenerateSkeletonError("躯干长度为零，无法归一化尺度")

    axis = reference.positions[JointIndex.R_SHOULDER] - reference.positions[JointIndex.L_SHOULDER]
    if np.hypot(axis[0], axis[2]) < _EPS:
        # 肩轴竖直时退而使用髋轴
        axis = reference.positions[JointIndex.R_HIP] - reference.positions[JointIndex.L_HIP]
        if np.hypot(axis[0], axis[2]) < _EPS:
            raise DegenerateSkeletonError("肩轴与髋轴在水平面上的投影均为零，无法确定朝向")
        logger.debug("shoulder axis is vertical, falling back to hip axis")

    yaw = float(np.arctan2(axis[2], axis[0]))
    return NormalizationFrame(root=root, yaw=yaw, scale=torso)


def normalize_skeleton(skeleton: Skeleton3D, reference: Optional[Skeleton3D] = None) -> Skeleton3D:
    """
    归一化单帧骨架

    Args:
        skeleton: 待归一化骨架
        reference: 提供朝向/尺度的参考帧（序列首帧），默认为骨架自身

    Returns:
        归一化后的骨架，运动向量经同一旋转与尺度变换
    """
    frame = normalization_frame(reference if reference is not None else skeleton)
    return frame.apply(skeleton)


@dataclass(frozen=True)
class NormalizedSequence:
    """归一化后的骨架序列及其归一化参数"""
    skeletons: Tuple[Skeleton3D, ...]
    frame: NormalizationFrame

    @property
    def view_angle(self) -> float:
        """首帧朝向角，在缩放正交投影模型下等于样本视角 theta（取值 [0, 2pi)）"""
        return float(np.mod(self.frame.yaw, 2.0 * np.pi))


def normalize_sequence(skeletons: Sequence[Skeleton3D]) -> NormalizedSequence:
    """
    以首帧为参考归一化整段序列

    Raises:
        EmptyInputError: 序列为空
    """
    if not skeletons:
        raise EmptyInputError("骨架序列为空")
    frame = normalization_frame(skeletons[0])
    return NormalizedSequence(
        skeletons=tuple(frame.apply(s) for s in skeletons),
        frame=frame,
    )
