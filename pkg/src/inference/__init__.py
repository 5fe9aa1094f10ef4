"""
Inference - 响应图、距离变换、跨视角姿态检测、视角估计、金字塔池化与动作分类
"""

from .response import FILL_SCORE, ResponseMap, bin_responses, part_response, raw_part_responses
from .distance_transform import DistanceTransform, distance_transform, envelope_max
from .detection import (
    Detection,
    FrameDetections,
    LevelScores,
    PoseDetections,
    detect_frame,
    detect_poses,
    non_maximum_suppression,
    score_level,
)
from .view import estimate_view, majority_view
from .pyramid import collapse_scales, pyramid_pool, standardize
from .classify import (
    Classification,
    VideoPyramids,
    classify,
    decide,
    lowres_pyramids,
    pose_frame_maps,
    raw_frame_maps,
    score_actions,
    video_pyramids,
)

__all__ = [
    'FILL_SCORE',
    'ResponseMap',
    'bin_responses',
    'part_response',
    'raw_part_responses',
    'DistanceTransform',
    'distance_transform',
    'envelope_max',
    'Detection',
    'FrameDetections',
    'LevelScores',
    'PoseDetections',
    'detect_frame',
    'detect_poses',
    'non_maximum_suppression',
    'score_level',
    'estimate_view',
    'majority_view',
    'collapse_scales',
    'pyramid_pool',
    'standardize',
    'Classification',
    'VideoPyramids',
    'classify',
    'decide',
    'lowres_pyramids',
    'pose_frame_maps',
    'raw_frame_maps',
    'score_actions',
    'video_pyramids',
]
