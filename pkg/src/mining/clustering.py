"""
部件样本的谱聚类

亲和矩阵 W = exp(-D / median(D))，对称归一化拉普拉斯 L = I - D^-1/2 W D^-1/2，
聚类数取前 max_clusters 个特征值中的最大特征间隙，行归一化后的特征向量用 KMeans 划分。
样本数少于 cluster_floor 的簇被丢弃，剩余簇的均值即部件项。
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import KMeans

from ..core.errors import EmptyInputError
from ..schemas.config_schemas import MiningConfig
from .distance import PartExample, distance_matrix, stack_examples


logger = logging.getLogger(__name__)

_ZERO_DISTANCE = 1e-12


@dataclass(frozen=True, eq=False)
class PartItem:
    """部件项: 一个簇的平均关节位置 / 运动与成员数"""
    item_id: str
    part_id: int
    positions: np.ndarray
    motions: np.ndarray
    visible: np.ndarray
    members: int
    member_indices: Tuple[int, ...] = ()

    def as_example(self) -> PartExample:
        return PartExample(
            part_id=self.part_id,
            positions=self.positions,
            motions=self.motions,
            visible=self.visible,
        )

    def to_dict(self) -> dict:
        return {
            'item_id': self.item_id,
            'part_id': self.part_id,
            'members': self.members,
            'positions': self.positions.tolist(),
            'motions': self.motions.tolist(),
            'visible': [bool(v) for v in self.visible],
        }


def affinity_matrix(distances: np.ndarray) -> np.ndarray:
    """exp(-D / sigma)，sigma 为非对角距离的中位数"""
    n = distances.shape[0]
    off_diagonal = distances[~np.eye(n, dtype=bool)]
    sigma = float(np.median(off_diagonal)) if off_diagonal.size else 0.0
    if sigma <= _ZERO_DISTANCE:
        sigma = max(float(off_diagonal.max()) if off_diagonal.size else 0.0, 1.0)
    return np.exp(-distances / sigma)


def spectral_embedding(affinity: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """对称归一化拉普拉斯的特征值（升序）与特征向量"""
    degree = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degree, 1e-300))
    laplacian = np.eye(affinity.shape[0]) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    values, vectors = np.linalg.eigh(0.5 * (laplacian + laplacian.T))
    return values, vectors


def eigengap_count(values: np.ndarray, max_clusters: int) -> int:
    """在前 max_clusters 个特征值中取最大间隙处的聚类数"""
    limit = min(max_clusters, values.size - 1)
    if limit < 1:
        return 1
    gaps = np.diff(values[:limit + 1])
    return int(np.argmax(gaps)) + 1


def spectral_labels(distances: np.ndarray, max_clusters: int, seed: int = 0) -> np.ndarray:
    """由距离矩阵得到簇标签"""
    n = distances.shape[0]
    if np.all(distances <= _ZERO_DISTANCE):
        return np.zeros(n, dtype=np.int64)
    values, vectors = spectral_embedding(affinity_matrix(distances))
    count = eigengap_count(values, max_clusters)
    if count == 1:
        return np.zeros(n, dtype=np.int64)
    embedding = vectors[:, :count]
    norms = np.linalg.norm(embedding, axis=1, keepdims=True)
    embedding = embedding / np.maximum(norms, 1e-12)
    kmeans = KMeans(n_clusters=count, n_init=10, random_state=seed)
    return kmeans.fit_predict(embedding)


def cluster_parts(
    examples: Sequence[PartExample],
    config: Optional[MiningConfig] = None,
    seed: int = 0,
    distances: Optional[np.ndarray] = None,
) -> List[PartItem]:
    """
    把一个部件的样本聚类为部件项

    Args:
        examples: 同一部件的样本（至少 2 个）
        config: 挖掘配置（可见性惩罚、簇大小下限、聚类数上限、对齐方式）
        seed: KMeans 随机种子
        distances: 预先计算的对称距离矩阵

    Returns:
        按成员数降序排列的部件项；所有簇都小于下限时返回空列表

    Raises:
        EmptyInputError: 样本少于 2 个
    """
    config = config or MiningConfig()
    if len(examples) < 2:
        raise EmptyInputError(f"谱聚类至少需要 2 个样本, 得到 {len(examples)}")
    part_id = examples[0].part_id
    if distances is None:
        distances = distance_matrix(examples, config.visibility_penalty, config.alignment)
    labels = spectral_labels(distances, config.max_clusters, seed)

    positions, motions, visible = stack_examples(examples)
    clusters = []
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        if members.size < config.cluster_floor:
            logger.debug(f"部件 {part_id} 的簇 {label} 只有 {members.size} 个样本, 丢弃")
            continue
        clusters.append(members)
    clusters.sort(key=lambda m: (-m.size, int(m[0])))

    items = [
        PartItem(
            item_id=f"p{part_id}i{index}",
            part_id=part_id,
            positions=positions[members].mean(axis=0),
            motions=motions[members].mean(axis=0),
            visible=visible[members].mean(axis=0) >= 0.5,
            members=int(members.size),
            member_indices=tuple(int(m) for m in members),
        )
        for index, members in enumerate(clusters)
    ]
    if not items:
        logger.warning(f"部件 {part_id} 的所有簇都小于下限 {config.cluster_floor}, 没有部件项")
    else:
        logger.info(f"部件 {part_id}: {len(examples)} 个样本聚为 {len(items)} 个部件项")
    return items
