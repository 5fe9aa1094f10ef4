"""
Geometry - 3D 部件偏移、缩放正交投影与 2D 形变得分
"""

from .projection import (
    TWO_PI,
    ProjectionParams,
    fit_projection,
    fit_view_angle,
    projection_matrix,
    rotation_projection,
    wrap_angle,
)
from .gaussians import (
    OffsetGaussian2D,
    OffsetGaussian3D,
    deformation_score,
    estimate_offsets,
    floor_eigenvalues,
    part_offsets,
    project_offset,
)

__all__ = [
    'TWO_PI',
    'ProjectionParams',
    'fit_projection',
    'fit_view_angle',
    'projection_matrix',
    'rotation_projection',
    'wrap_angle',
    'OffsetGaussian2D',
    'OffsetGaussian3D',
    'deformation_score',
    'estimate_offsets',
    'floor_eigenvalues',
    'part_offsets',
    'project_offset',
]
