"""
姿态挖掘: 部件距离、谱聚类、Apriori 搜索与剪枝
"""

from .similarity import SimilarityTransform, fit_similarity, fit_similarity_batch
from .distance import PartExample, distance_matrix, distances_to, part_distance, symmetric_distance
from .clustering import PartItem, cluster_parts, eigengap_count, spectral_labels
from .poses import (
    ActivationIndex,
    MiningCorpus,
    PoseCandidate,
    activation,
    build_corpus,
    item_frame_distances,
    collect_part_examples,
    mine_class_poses,
    mine_poses,
    pose_table_rows,
    remove_non_maximal,
    support_and_discrimination,
)
from .pruning import greedy_cover, pose_distance, prune_by_validation, prune_poses, validation_ap

__all__ = [
    'SimilarityTransform', 'fit_similarity', 'fit_similarity_batch',
    'PartExample', 'distance_matrix', 'distances_to', 'part_distance', 'symmetric_distance',
    'PartItem', 'cluster_parts', 'eigengap_count', 'spectral_labels',
    'ActivationIndex', 'MiningCorpus', 'PoseCandidate', 'activation', 'build_corpus', 'item_frame_distances',
    'collect_part_examples', 'mine_class_poses', 'mine_poses', 'pose_table_rows',
    'remove_non_maximal', 'support_and_discrimination',
    'greedy_cover', 'pose_distance', 'prune_by_validation', 'prune_poses', 'validation_ap',
]
