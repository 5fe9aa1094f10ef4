"""
姿态挖掘

姿态候选是若干部件项的集合（每个部件至多一项）。候选在一段视频上的激活值为
exp(-min_t sum_k D_k(item_k, frame_t))，类别支持度为该类视频激活值的均值，
判别度为本类支持度与其余类支持度之和的比值。

逐层增长候选（类 Apriori）: 支持度低于阈值的候选不再扩展，
增加部件项不会提高支持度，因此剪枝不会丢失满足条件的候选。
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..core.data_models import DEFAULT_PARTS, Dataset, PartDefinition, Skeleton3D
from ..core.errors import EmptyInputError
from ..core.skeleton import normalize_sequence
from ..schemas.config_schemas import MiningConfig
from .clustering import PartItem
from .distance import PartExample, distances_to


logger = logging.getLogger(__name__)

_MONOTONE_TOL = 1e-9


# ============================================================================
# 挖掘语料
# ============================================================================

@dataclass(frozen=True, eq=False)
class MiningCorpus:
    """归一化并按步长采样后的训练骨架序列"""
    sample_ids: Tuple[str, ...]
    labels: Tuple[str, ...]
    vocabulary: Tuple[str, ...]
    sequences: Tuple[Tuple[Skeleton3D, ...], ...]
    frame_indices: Tuple[Tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.sample_ids)


def build_corpus(dataset: Dataset, frame_stride: int = 1) -> MiningCorpus:
    """
    归一化数据集中每个样本的骨架序列

    Raises:
        EmptyInputError: 数据集为空或有样本没有骨架
    """
    if len(dataset) == 0:
        raise EmptyInputError("挖掘需要非空的训练集")
    sequences, indices = [], []
    for sample in dataset:
        if not sample.has_skeletons:
            raise EmptyInputError(f"样本 {sample.sample_id} 没有骨架, 无法挖掘姿态")
        normalized = normalize_sequence(sample.skeletons).skeletons
        frames = tuple(range(0, len(normalized), frame_stride))
        sequences.append(tuple(normalized[t] for t in frames))
        indices.append(frames)
    return MiningCorpus(
        sample_ids=tuple(s.sample_id for s in dataset),
        labels=tuple(s.action for s in dataset),
        vocabulary=tuple(dataset.vocabulary),
        sequences=tuple(sequences),
        frame_indices=tuple(indices),
    )


def collect_part_examples(
    corpus: MiningCorpus,
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    max_examples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dict[int, List[PartExample]]:
    """每个部件的样本；超过 max_examples 时用 rng 无放回抽样（保持原顺序）"""
    examples: Dict[int, List[PartExample]] = {}
    for part in parts:
        collected = [
            PartExample.from_skeleton(skeleton, part, sample_id, frame)
            for sample_id, sequence, frames in zip(corpus.sample_ids, corpus.sequences, corpus.frame_indices)
            for skeleton, frame in zip(sequence, frames)
        ]
        if max_examples is not None and len(collected) > max_examples:
            rng = rng or np.random.default_rng(0)
            chosen = np.sort(rng.choice(len(collected), size=max_examples, replace=False))
            collected = [collected[i] for i in chosen]
        examples[part.part_id] = collected
    return examples


# ============================================================================
# 激活值 / 支持度 / 判别度
# ============================================================================

@dataclass(frozen=True, eq=False)
class PoseCandidate:
    """姿态候选: 部件项集合及其各类支持度 / 判别度"""
    items: Tuple[PartItem, ...]
    support: Dict[str, float] = field(default_factory=dict)
    discrimination: Dict[str, float] = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self):
        items = tuple(sorted(self.items, key=lambda i: (i.part_id, i.item_id)))
        parts = [i.part_id for i in items]
        if len(set(parts)) != len(parts):
            raise ValueError(f"姿态候选的部件项必须来自不同部件: {[i.item_id for i in items]}")
        object.__setattr__(self, 'items', items)

    @property
    def key(self) -> FrozenSet[str]:
        return frozenset(i.item_id for i in self.items)

    @property
    def item_ids(self) -> Tuple[str, ...]:
        return tuple(i.item_id for i in self.items)

    @property
    def part_ids(self) -> Tuple[int, ...]:
        return tuple(i.part_id for i in self.items)

    @property
    def pose_id(self) -> str:
        prefix = f"{self.label}:" if self.label else ''
        return prefix + '+'.join(self.item_ids)

    @property
    def score(self) -> float:
        """所属类别的判别度"""
        return self.discrimination.get(self.label, 0.0) if self.label else 0.0


def _part_lookup(parts: Sequence[PartDefinition]) -> Dict[int, PartDefinition]:
    return {p.part_id: p for p in parts}


def item_frame_distances(
    item: PartItem,
    sequence: Sequence[Skeleton3D],
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    config: Optional[MiningConfig] = None,
) -> np.ndarray:
    """部件项到序列每一帧对应部件的对称距离 (T,)"""
    config = config or MiningConfig()
    part = _part_lookup(parts)[item.part_id]
    frames = [PartExample.from_skeleton(s, part) for s in sequence]
    return distances_to(item.as_example(), frames, config.visibility_penalty, config.alignment)


def activation(
    items: Sequence[PartItem],
    sequence: Sequence[Skeleton3D],
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    config: Optional[MiningConfig] = None,
) -> float:
    """
    姿态在一段归一化骨架序列上的激活值 exp(-min_t D(p, p^t))

    Raises:
        EmptyInputError: 序列没有骨架
    """
    if not sequence:
        raise EmptyInputError("计算激活值需要骨架序列")
    total = np.zeros(len(sequence))
    for item in items:
        total += item_frame_distances(item, sequence, parts, config)
    return float(np.exp(-total.min()))


def support_and_discrimination(
    activations: np.ndarray,
    labels: Sequence[str],
    vocabulary: Sequence[str],
) -> Tuple[Dict[str, float], Dict[str, float]]:
    """
    各类支持度（类内平均激活值）与判别度 Supp(c) / sum_{c' != c} Supp(c')

    没有视频的类别不参与计算。
    """
    activations = np.asarray(activations, dtype=np.float64)
    labels = np.asarray(labels)
    support = {
        c: float(activations[labels == c].mean())
        for c in vocabulary
        if np.any(labels == c)
    }
    total = sum(support.values())
    discrimination = {}
    for c, value in support.items():
        others = total - value
        discrimination[c] = value / others if others > 0 else float('inf')
    return support, discrimination


class ActivationIndex:
    """
    预先计算每个部件项到每段视频每一帧的距离，
    候选姿态的激活值只需对其部件项的距离求和。
    """

    def __init__(
        self,
        corpus: MiningCorpus,
        items: Iterable[PartItem],
        parts: Sequence[PartDefinition] = DEFAULT_PARTS,
        config: Optional[MiningConfig] = None,
    ):
        self.corpus = corpus
        self.config = config or MiningConfig()
        self.items: Dict[str, PartItem] = {}
        self._distances: Dict[str, Tuple[np.ndarray, ...]] = {}
        self._cache: Dict[FrozenSet[str], Tuple[Dict[str, float], Dict[str, float]]] = {}
        for item in items:
            self.items[item.item_id] = item
            self._distances[item.item_id] = tuple(
                item_frame_distances(item, sequence, parts, self.config)
                for sequence in corpus.sequences
            )

    def frame_distances(self, item_ids: Iterable[str]) -> Tuple[np.ndarray, ...]:
        """每段视频逐帧的姿态距离"""
        item_ids = list(item_ids)
        return tuple(
            sum(self._distances[i][v] for i in item_ids)
            for v in range(len(self.corpus))
        )

    def activations(self, item_ids: Iterable[str]) -> np.ndarray:
        return np.array([np.exp(-d.min()) for d in self.frame_distances(item_ids)])

    def evaluate(self, key: FrozenSet[str]) -> Tuple[Dict[str, float], Dict[str, float]]:
        if key not in self._cache:
            self._cache[key] = support_and_discrimination(
                self.activations(sorted(key)), self.corpus.labels, self.corpus.vocabulary,
            )
        return self._cache[key]

    def candidate(self, key: FrozenSet[str], label: Optional[str] = None) -> PoseCandidate:
        support, discrimination = self.evaluate(key)
        return PoseCandidate(
            items=tuple(self.items[i] for i in key),
            support=support,
            discrimination=discrimination,
            label=label,
        )


# ============================================================================
# Apriori 挖掘
# ============================================================================

def _distinct_parts(key: FrozenSet[str], items: Mapping[str, PartItem]) -> bool:
    parts = [items[i].part_id for i in key]
    return len(set(parts)) == len(parts)


def remove_non_maximal(candidates: Sequence[PoseCandidate]) -> List[PoseCandidate]:
    """去掉被其他候选严格包含的候选"""
    keys = [c.key for c in candidates]
    return [c for c in candidates if not any(c.key < other for other in keys)]


def mine_class_poses(
    index: ActivationIndex,
    label: str,
    config: Optional[MiningConfig] = None,
    max_items: Optional[int] = None,
) -> List[PoseCandidate]:
    """
    挖掘一个类别的判别姿态

    Returns:
        满足支持度与判别度阈值的极大候选，按判别度降序
    """
    config = config or MiningConfig()
    items = index.items
    max_items = max_items or config.max_items_per_pose or len({i.part_id for i in items.values()})

    def supported(key: FrozenSet[str]) -> bool:
        support, _ = index.evaluate(key)
        return support.get(label, 0.0) >= config.support_threshold

    level = {frozenset([i]) for i in sorted(items) if supported(frozenset([i]))}
    frequent = set(level)
    size = 1
    while level and size < max_items:
        next_level = set()
        ordered = sorted(level, key=lambda k: sorted(k))
        for a, b in combinations(ordered, 2):
            union = a | b
            if len(union) != size + 1 or union in next_level or not _distinct_parts(union, items):
                continue
            subsets = [union - {i} for i in union]
            if not all(s in frequent for s in subsets):
                continue
            union_support = index.evaluate(union)[0].get(label, 0.0)
            for subset in subsets:
                assert union_support <= index.evaluate(subset)[0].get(label, 0.0) + _MONOTONE_TOL, \
                    f"支持度反单调性被破坏: {sorted(union)}"
            if union_support >= config.support_threshold:
                next_level.add(union)
        logger.debug(f"类别 {label}: {size + 1} 项候选 {len(next_level)} 个")
        frequent |= next_level
        level = next_level
        size += 1

    survivors = [
        index.candidate(key, label)
        for key in sorted(frequent, key=lambda k: sorted(k))
        if index.evaluate(key)[1].get(label, 0.0) >= config.discrimination_threshold
    ]
    maximal = remove_non_maximal(survivors)
    maximal.sort(key=lambda c: (-c.score, c.pose_id))
    logger.info(
        f"类别 {label}: {len(frequent)} 个频繁候选, {len(survivors)} 个判别候选, {len(maximal)} 个极大姿态"
    )
    return maximal


def mine_poses(
    items_by_part: Mapping[int, Sequence[PartItem]],
    corpus: MiningCorpus,
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    config: Optional[MiningConfig] = None,
    index: Optional[ActivationIndex] = None,
) -> Dict[str, List[PoseCandidate]]:
    """
    在所有类别上挖掘判别姿态

    Raises:
        EmptyInputError: 没有任何部件项
    """
    config = config or MiningConfig()
    all_items = [item for part_items in items_by_part.values() for item in part_items]
    if not all_items:
        raise EmptyInputError("没有部件项, 无法挖掘姿态")
    index = index or ActivationIndex(corpus, all_items, parts, config)
    present = set(corpus.labels)
    return {
        label: mine_class_poses(index, label, config)
        for label in corpus.vocabulary
        if label in present
    }


def pose_table_rows(poses: Mapping[str, Sequence[PoseCandidate]], vocabulary: Sequence[str]) -> List[dict]:
    """姿态表: 每个姿态一行，含部件项与各类支持度 / 判别度"""
    rows = []
    for label, candidates in poses.items():
        for candidate in candidates:
            row = {'label': label, 'pose_id': candidate.pose_id, 'items': ' '.join(candidate.item_ids)}
            for c in vocabulary:
                row[f'supp_{c}'] = candidate.support.get(c, '')
                row[f'disc_{c}'] = candidate.discrimination.get(c, '')
            rows.append(row)
    return rows
