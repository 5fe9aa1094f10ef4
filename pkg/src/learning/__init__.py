"""
Learning - 正负样本、隐变量 SVM、动作 SVM 与训练流水线
"""

from .latent_svm import (
    DenseBatch,
    FeatureBatch,
    SolverResult,
    best_scale,
    convex_step,
    hinge_slacks,
    pegasos,
    regularization,
    svm_objective,
)
from .pose_features import MIN_PRECISION, PlacementFeatures, PoseBatch, PoseLayout, placement_features
from .harvest import TrainExample, fit_frame_projection, harvest_positives, pose_parts
from .negatives import NegativeSet, negative_frame_pool
from .pose_trainer import PoseTrainingReport, initial_pose_model, latent_placement, train_pose
from .action_svm import train_action
from .pipeline import TrainingReport, mine_stage, split_validation, train_pipeline

__all__ = [
    'DenseBatch', 'FeatureBatch', 'SolverResult', 'best_scale', 'convex_step', 'hinge_slacks',
    'pegasos', 'regularization', 'svm_objective',
    'MIN_PRECISION', 'PlacementFeatures', 'PoseBatch', 'PoseLayout', 'placement_features',
    'TrainExample', 'fit_frame_projection', 'harvest_positives', 'pose_parts',
    'NegativeSet', 'negative_frame_pool',
    'PoseTrainingReport', 'initial_pose_model', 'latent_placement', 'train_pose',
    'train_action',
    'TrainingReport', 'mine_stage', 'split_validation', 'train_pipeline',
]
