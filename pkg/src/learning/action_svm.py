"""
动作节点的线性 SVM（一对其余）

特征为视频的 [P_1 .. P_Np, L_1 .. L_Nl] 金字塔拼接，末尾追加常数 1 作为偏置维。
与姿态检测器共用同一个求解器，使用全批量次梯度（确定性）。
"""

import logging
from typing import Dict, Optional, Sequence

import numpy as np

from ..aog import PYRAMID_DIM, ActionModel
from ..core.errors import EmptyInputError, SizeError
from ..schemas.config_schemas import TrainingConfig
from .latent_svm import DenseBatch, convex_step, regularization


logger = logging.getLogger(__name__)


def train_action(
    features: np.ndarray,
    labels: Sequence[str],
    vocabulary: Sequence[str],
    pose_ids: Sequence[str],
    num_lowres: int,
    config: Optional[TrainingConfig] = None,
) -> Dict[str, ActionModel]:
    """
    为每个出现的动作训练一个一对其余的线性 SVM

    Args:
        features: (n, 73 * (N_P + N_L)) 每段视频的金字塔向量
        labels: 每段视频的动作标签
        vocabulary: 动作词表（决定输出顺序）
        pose_ids: 金字塔对应的姿态 ID 顺序
        num_lowres: 低分辨率金字塔数量

    Raises:
        SizeError: 特征维度不是 73 * (N_P + N_L)
        EmptyInputError: 训练数据中少于两个类别
    """
    config = config or TrainingConfig()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    expected = PYRAMID_DIM * (len(pose_ids) + num_lowres)
    if features.ndim != 2 or features.shape[1] != expected or features.shape[0] != labels.size:
        raise SizeError(
            f"动作特征应为 (n, {expected}) 且与标签数量一致, 得到 {features.shape} 与 {labels.size} 个标签"
        )
    present = [c for c in vocabulary if np.any(labels == c)]
    if len(present) < 2:
        raise EmptyInputError(f"动作 SVM 至少需要两个类别, 得到 {present}")

    design = np.hstack([features, np.ones((features.shape[0], 1))])
    lam = regularization(config.action_C, design.shape[0])
    actions = {}
    for label in present:
        target = np.where(labels == label, 1.0, -1.0)
        batch = DenseBatch(design, target)
        result = convex_step(batch, lam, config.action_epochs, batch_size=None)
        weights = result.weights
        accuracy = float(np.mean(np.sign(design @ weights) == target))
        logger.info(f"动作 {label}: 目标 {result.objective:.6g}, 训练准确率 {accuracy:.3f}")
        actions[label] = ActionModel(
            label=label,
            pose_ids=tuple(pose_ids),
            num_lowres=num_lowres,
            weights=weights[:-1],
            bias=float(weights[-1]),
        )
    return actions
