"""
Features - HOG / 光流 / HOF / 低分辨率特征与逐帧特征金字塔
"""

from .hog import FeatureMap, compute_hog
from .flow import FlowField, compute_flow
from .hof import compute_hof
from .lowres import LowResFeature, compute_lowres, lowres_maps
from .pyramid import (
    FeatureCache,
    FrameFeatures,
    ScaleLevel,
    compute_frame_features,
    grid_to_pixel,
    pixel_to_grid,
    scale_factors,
)

__all__ = [
    'FeatureMap',
    'compute_hog',
    'FlowField',
    'compute_flow',
    'compute_hof',
    'LowResFeature',
    'compute_lowres',
    'lowres_maps',
    'FeatureCache',
    'FrameFeatures',
    'ScaleLevel',
    'compute_frame_features',
    'grid_to_pixel',
    'pixel_to_grid',
    'scale_factors',
]
