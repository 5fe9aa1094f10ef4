"""
姿态剪枝

1. 集合覆盖: 每个类别按判别度降序贪心选取，与已选姿态距离小于阈值的候选被覆盖
2. 验证剪枝: 训练后在验证集上平均精度低于下限的姿态被删除
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar

import numpy as np
from sklearn.metrics import average_precision_score

from ..schemas.config_schemas import MiningConfig
from .distance import symmetric_distance
from .poses import PoseCandidate


logger = logging.getLogger(__name__)

T = TypeVar('T')


def pose_distance(a: PoseCandidate, b: PoseCandidate, penalty: float = 1.0, alignment: str = 'vertical') -> float:
    """两个姿态的距离: 部件集合相同时为对应部件项对称距离的均值，否则为无穷大"""
    if a.part_ids != b.part_ids:
        return float('inf')
    values = [
        symmetric_distance(x.as_example(), y.as_example(), penalty, alignment)
        for x, y in zip(a.items, b.items)
    ]
    return float(np.mean(values))


def greedy_cover(
    candidates: Sequence[PoseCandidate],
    config: Optional[MiningConfig] = None,
) -> List[PoseCandidate]:
    """按判别度降序贪心选取，跳过与已选姿态距离不超过阈值的候选"""
    config = config or MiningConfig()
    ordered = sorted(candidates, key=lambda c: (-c.score, c.pose_id))
    kept: List[PoseCandidate] = []
    for candidate in ordered:
        covered = any(
            pose_distance(candidate, k, config.visibility_penalty, config.alignment) <= config.similarity_threshold
            for k in kept
        )
        if covered:
            logger.debug(f"姿态 {candidate.pose_id} 被已选姿态覆盖")
            continue
        kept.append(candidate)
    return kept


def validation_ap(scores: Sequence[float], positives: Sequence[bool]) -> float:
    """验证集上的平均精度；没有正样本时为 0"""
    positives = np.asarray(positives, dtype=bool)
    if not positives.any():
        return 0.0
    return float(average_precision_score(positives, np.asarray(scores, dtype=np.float64)))


def prune_by_validation(
    poses: Sequence[T],
    floor: float,
    label_of=lambda p: p.label,
    ap_of=lambda p: p.validation_ap,
) -> Tuple[List[T], List[T]]:
    """
    删除验证平均精度低于 floor 的姿态

    某个类别的所有姿态都低于下限时保留其中平均精度最高的一个，保证每个类别至少一个姿态。

    Returns:
        (保留, 删除)
    """
    by_label: Dict[str, List[T]] = {}
    for pose in poses:
        by_label.setdefault(label_of(pose), []).append(pose)
    kept, removed = [], []
    for label, group in by_label.items():
        passing = [p for p in group if (ap_of(p) or 0.0) >= floor]
        if not passing:
            best = max(group, key=lambda p: ap_of(p) or 0.0)
            logger.warning(f"类别 {label} 的所有姿态验证平均精度都低于 {floor}, 保留最好的一个")
            passing = [best]
        kept.extend(passing)
        removed.extend(p for p in group if p not in passing)
    return kept, removed


def prune_poses(
    poses: Mapping[str, Sequence[PoseCandidate]],
    config: Optional[MiningConfig] = None,
    validation: Optional[Mapping[str, float]] = None,
) -> Dict[str, List[PoseCandidate]]:
    """
    剪枝挖掘得到的姿态

    Args:
        poses: 类别 -> 候选
        config: 挖掘配置
        validation: 可选的 pose_id -> 验证平均精度，给定时再做验证剪枝
    """
    config = config or MiningConfig()
    result = {}
    for label, candidates in poses.items():
        kept = greedy_cover(candidates, config)
        if validation is not None:
            kept, removed = prune_by_validation(
                kept, config.validation_floor, ap_of=lambda c: validation.get(c.pose_id, 0.0),
            )
            for c in removed:
                logger.info(f"删除验证平均精度过低的姿态 {c.pose_id}")
        logger.info(f"类别 {label}: {len(candidates)} 个候选剪枝后剩 {len(kept)} 个")
        result[label] = kept
    return result
