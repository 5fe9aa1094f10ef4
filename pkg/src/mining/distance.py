"""
部件样本距离

D_k(s, r) = sum_j (|p_j^s - S p_j^r|^2 + |m_j^s - S_R m_j^r|^2) (1 + h_j)

S 为把 r 对齐到 s 的相似变换，运动向量只作用旋转与缩放；
h_j = a 当两个样本中关节 j 的可见性不同，否则为 0。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.data_models import PartDefinition, Skeleton3D
from ..core.errors import SizeError
from .similarity import fit_similarity_batch


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PartExample:
    """一个部件在某一帧的归一化关节位置、运动与可见性"""
    part_id: int
    positions: np.ndarray
    motions: np.ndarray
    visible: np.ndarray
    sample_id: Optional[str] = None
    frame: Optional[int] = None

    @classmethod
    def from_skeleton(
        cls,
        skeleton: Skeleton3D,
        part: PartDefinition,
        sample_id: Optional[str] = None,
        frame: Optional[int] = None,
    ) -> 'PartExample':
        joints = list(part.joints)
        return cls(
            part_id=part.part_id,
            positions=skeleton.positions[joints].copy(),
            motions=skeleton.motions[joints].copy(),
            visible=skeleton.visible[joints].copy(),
            sample_id=sample_id,
            frame=frame,
        )

    @property
    def num_joints(self) -> int:
        return self.positions.shape[0]


def stack_examples(examples: Sequence[PartExample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(n, J, 3) 位置、(n, J, 3) 运动、(n, J) 可见性"""
    sizes = {e.num_joints for e in examples}
    if len(sizes) > 1:
        raise SizeError(f"部件样本的关节数量不一致: {sorted(sizes)}")
    return (
        np.stack([e.positions for e in examples]),
        np.stack([e.motions for e in examples]),
        np.stack([e.visible for e in examples]),
    )


def directed_distances(
    s_pos: np.ndarray,
    s_mot: np.ndarray,
    s_vis: np.ndarray,
    r_pos: np.ndarray,
    r_mot: np.ndarray,
    r_vis: np.ndarray,
    penalty: float = 1.0,
    alignment: str = 'vertical',
) -> np.ndarray:
    """批量 D(s_b, r_b)，输入为 (B, J, 3) / (B, J)"""
    scale, rotation, translation, _ = fit_similarity_batch(r_pos, s_pos, alignment)
    aligned = scale[:, None, None] * np.einsum('bik,bjk->bji', rotation, r_pos) + translation[:, None, :]
    turned = scale[:, None, None] * np.einsum('bik,bjk->bji', rotation, r_mot)
    per_joint = np.sum((s_pos - aligned) ** 2, axis=2) + np.sum((s_mot - turned) ** 2, axis=2)
    weight = 1.0 + penalty * (s_vis != r_vis)
    return np.sum(per_joint * weight, axis=1)


def part_distance(s: PartExample, r: PartExample, penalty: float = 1.0, alignment: str = 'vertical') -> float:
    """
    单向部件距离 D_k(s, r)

    Raises:
        SizeError: 部件或关节数量不一致
    """
    if s.part_id != r.part_id or s.num_joints != r.num_joints:
        raise SizeError(
            f"部件距离要求同一部件: part {s.part_id} ({s.num_joints} 关节) vs "
            f"part {r.part_id} ({r.num_joints} 关节)"
        )
    return float(directed_distances(
        s.positions[None], s.motions[None], s.visible[None],
        r.positions[None], r.motions[None], r.visible[None],
        penalty, alignment,
    )[0])


def symmetric_distance(s: PartExample, r: PartExample, penalty: float = 1.0, alignment: str = 'vertical') -> float:
    """(D(s, r) + D(r, s)) / 2"""
    return 0.5 * (part_distance(s, r, penalty, alignment) + part_distance(r, s, penalty, alignment))


def distance_matrix(
    examples: Sequence[PartExample],
    penalty: float = 1.0,
    alignment: str = 'vertical',
) -> np.ndarray:
    """对称距离矩阵 (n, n)，对角线为 0"""
    pos, mot, vis = stack_examples(examples)
    n = len(examples)
    rows, cols = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
    rows, cols = rows.ravel(), cols.ravel()
    directed = directed_distances(
        pos[rows], mot[rows], vis[rows], pos[cols], mot[cols], vis[cols], penalty, alignment,
    ).reshape(n, n)
    matrix = 0.5 * (directed + directed.T)
    np.fill_diagonal(matrix, 0.0)
    return matrix


def distances_to(
    reference: PartExample,
    examples: Sequence[PartExample],
    penalty: float = 1.0,
    alignment: str = 'vertical',
) -> np.ndarray:
    """reference 到每个样本的对称距离 (n,)"""
    if not examples:
        return np.zeros(0)
    pos, mot, vis = stack_examples(examples)
    ref_pos = np.broadcast_to(reference.positions, pos.shape)
    ref_mot = np.broadcast_to(reference.motions, mot.shape)
    ref_vis = np.broadcast_to(reference.visible, vis.shape)
    forward = directed_distances(ref_pos, ref_mot, ref_vis, pos, mot, vis, penalty, alignment)
    backward = directed_distances(pos, mot, vis, ref_pos, ref_mot, ref_vis, penalty, alignment)
    return 0.5 * (forward + backward)
