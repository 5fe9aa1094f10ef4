"""
AOG - 多视角时空 AND-OR 图: 节点结构、得分函数与模型归档
"""

from .nodes import (
    PYRAMID_DIM,
    ActionModel,
    ModelArchive,
    PartModel,
    PoseModel,
    view_bin_centers,
    window_anchor,
)
from .scoring import (
    PoseScore,
    action_score,
    angular_distance,
    extract_patch,
    interp_weight,
    interp_weights,
    part_appearance_score,
    part_motion_score,
    part_score,
    pose_score,
    view_score,
    window_patches,
)
from .archive import archive_digest, load_archive, round_action, round_templates, save_archive, to_float32

__all__ = [
    'PYRAMID_DIM',
    'ActionModel',
    'ModelArchive',
    'PartModel',
    'PoseModel',
    'view_bin_centers',
    'window_anchor',
    'PoseScore',
    'action_score',
    'angular_distance',
    'archive_digest',
    'extract_patch',
    'interp_weight',
    'interp_weights',
    'part_appearance_score',
    'part_motion_score',
    'part_score',
    'pose_score',
    'view_score',
    'window_patches',
    'load_archive',
    'round_action',
    'round_templates',
    'save_archive',
    'to_float32',
]
