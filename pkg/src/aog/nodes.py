"""
AND-OR 图节点

- 动作节点 (AND): 姿态响应金字塔与低分辨率特征金字塔的线性组合
- 姿态节点 (OR): 在 M 个视角 bin 上取最大
- 视角节点 (AND): 部件得分之和加上子部件相对根部件的形变得分
- 部件节点 (AND): 外观模板响应 + 运动模板响应（视角间指数插值）

部件位置以窗口中心所在的网格元素 (x, y) 表示，窗口左上角 = 中心 - (w // 2, h // 2)。
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.data_models import PartDefinition
from ..core.errors import SizeError
from ..geometry import (
    OffsetGaussian2D,
    OffsetGaussian3D,
    ProjectionParams,
    TWO_PI,
    project_offset,
)
from ..schemas.config_schemas import FeatureConfig, ModelConfig


PYRAMID_DIM = 73


def view_bin_centers(num_bins: int) -> np.ndarray:
    """M 个均匀分布在 [0, 2pi) 上的视角 bin 中心"""
    return np.arange(num_bins) * (TWO_PI / num_bins)


def window_anchor(window: Sequence[int]) -> Tuple[int, int]:
    """窗口中心相对左上角的偏移 (dx, dy)"""
    return int(window[1]) // 2, int(window[0]) // 2


@dataclass(frozen=True, eq=False)
class PartModel:
    """
    部件节点

    app_templates: (M, h, w, D_hog) 每个视角 bin 的外观模板
    mot_templates: (M, h, w, D_hof) 每个视角 bin 的运动模板
    offset: 相对根部件的 3D 偏移高斯（根部件为 None）
    """
    part_id: int
    window: Tuple[int, int]
    app_templates: np.ndarray
    mot_templates: np.ndarray
    offset: Optional[OffsetGaussian3D] = None

    def __post_init__(self):
        app = np.asarray(self.app_templates, dtype=np.float64)
        mot = np.asarray(self.mot_templates, dtype=np.float64)
        window = tuple(int(v) for v in self.window)
        if app.ndim != 4 or mot.ndim != 4:
            raise SizeError("模板数组必须为 (M, h, w, D)")
        if app.shape[:3] != (app.shape[0],) + window or mot.shape[:3] != app.shape[:3]:
            raise SizeError(
                f"部件 {self.part_id} 的模板尺寸与窗口不一致: "
                f"app={app.shape}, mot={mot.shape}, window={window}"
            )
        if not (np.all(np.isfinite(app)) and np.all(np.isfinite(mot))):
            raise SizeError(f"部件 {self.part_id} 的模板包含非有限值")
        object.__setattr__(self, 'app_templates', app)
        object.__setattr__(self, 'mot_templates', mot)
        object.__setattr__(self, 'window', window)

    @classmethod
    def zeros(
        cls,
        part_id: int,
        window: Sequence[int],
        num_bins: int,
        app_dim: int,
        mot_dim: int,
        offset: Optional[OffsetGaussian3D] = None,
    ) -> 'PartModel':
        h, w = window
        return cls(
            part_id=part_id,
            window=(h, w),
            app_templates=np.zeros((num_bins, h, w, app_dim)),
            mot_templates=np.zeros((num_bins, h, w, mot_dim)),
            offset=offset,
        )

    @property
    def num_bins(self) -> int:
        return self.app_templates.shape[0]

    @property
    def app_dim(self) -> int:
        return self.app_templates.shape[3]

    @property
    def stacked_templates(self) -> np.ndarray:
        """(M, h * w * (D_hog + D_hof))，与拼接后的特征块展开顺序一致"""
        stacked = np.concatenate([self.app_templates, self.mot_templates], axis=3)
        return stacked.reshape(self.num_bins, -1)

    def with_stacked_templates(self, stacked: np.ndarray) -> 'PartModel':
        h, w = self.window
        stacked = np.asarray(stacked, dtype=np.float64).reshape(self.num_bins, h, w, -1)
        return replace(
            self,
            app_templates=stacked[..., :self.app_dim],
            mot_templates=stacked[..., self.app_dim:],
        )


@dataclass(frozen=True, eq=False)
class PoseModel:
    """
    姿态节点

    model_scale: 每个归一化骨架单位对应的特征网格单元数（所有视角共用 k1 = k2）
    bin_means: 仅在视角不共享几何时使用，(M, N, 2) 每个 bin 单独估计的 2D 偏移均值（网格单位）
    """
    pose_id: str
    label: str
    root: PartModel
    children: Tuple[PartModel, ...]
    view_centers: np.ndarray
    model_scale: float
    bias: float = 0.0
    share_views: bool = True
    items: Tuple[str, ...] = ()
    bin_means: Optional[np.ndarray] = None
    projections: Dict[str, ProjectionParams] = field(default_factory=dict)
    eigen_floor: float = 1e-6
    response_mean: float = 0.0
    response_std: float = 1.0
    discrimination: float = 0.0
    validation_ap: Optional[float] = None

    def __post_init__(self):
        centers = np.asarray(self.view_centers, dtype=np.float64)
        if centers.ndim != 1 or centers.size < 1:
            raise SizeError("姿态至少需要一个视角 bin")
        if np.unique(np.round(np.mod(centers, TWO_PI), 12)).size != centers.size:
            raise SizeError(f"视角 bin 中心必须互不相同: {centers.tolist()}")
        object.__setattr__(self, 'view_centers', centers)
        object.__setattr__(self, 'children', tuple(self.children))
        for part in self.parts:
            if part.num_bins != centers.size:
                raise SizeError(
                    f"部件 {part.part_id} 有 {part.num_bins} 个视角模板, 姿态有 {centers.size} 个视角 bin"
                )
        for child in self.children:
            if child.offset is None:
                raise SizeError(f"子部件 {child.part_id} 缺少偏移高斯")
        if self.bin_means is not None:
            means = np.asarray(self.bin_means, dtype=np.float64)
            if means.shape != (centers.size, len(self.children), 2):
                raise SizeError(f"bin_means 形状应为 {(centers.size, len(self.children), 2)}, 得到 {means.shape}")
            object.__setattr__(self, 'bin_means', means)

    @property
    def num_bins(self) -> int:
        return self.view_centers.size

    @property
    def parts(self) -> Tuple[PartModel, ...]:
        return (self.root,) + self.children

    def nearest_bin(self, theta: float) -> int:
        """与 theta 回绕距离最近的 bin，距离相同时取较小的索引"""
        delta = np.abs(np.mod(theta - self.view_centers + np.pi, TWO_PI) - np.pi)
        return int(np.argmin(delta))

    def view_weights(self, theta: float) -> np.ndarray:
        """视角 theta 下各 bin 模板的归一化插值权重"""
        from .scoring import interp_weights

        if not self.share_views:
            weights = np.zeros(self.num_bins)
            weights[self.nearest_bin(theta)] = 1.0
            return weights
        return interp_weights(theta, self.view_centers)

    def bin_weight_matrix(self) -> np.ndarray:
        """(M, M)，第 m 行为 theta = theta_m 时的插值权重"""
        return np.stack([self.view_weights(t) for t in self.view_centers])

    def projection(self, theta: float) -> ProjectionParams:
        return ProjectionParams(k1=self.model_scale, k2=self.model_scale, theta=theta)

    def projected_offsets(self, theta: float) -> List[OffsetGaussian2D]:
        """子部件在视角 theta 下的 2D 偏移高斯（网格单位）"""
        params = self.projection(theta)
        projected = [project_offset(child.offset, params, self.eigen_floor) for child in self.children]
        if self.share_views or self.bin_means is None:
            return projected
        means = self.bin_means[self.nearest_bin(theta)]
        return [OffsetGaussian2D(mean=means[i], cov=g.cov) for i, g in enumerate(projected)]


@dataclass(frozen=True, eq=False)
class ActionModel:
    """动作节点: 权重覆盖 N_P 个姿态金字塔与 N_L 个低分辨率金字塔，每个金字塔 73 维"""
    label: str
    pose_ids: Tuple[str, ...]
    num_lowres: int
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        expected = PYRAMID_DIM * (len(self.pose_ids) + self.num_lowres)
        if weights.size != expected:
            raise SizeError(
                f"动作 {self.label} 的权重长度应为 73 x ({len(self.pose_ids)} + {self.num_lowres}) = {expected}, "
                f"得到 {weights.size}"
            )
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'pose_ids', tuple(self.pose_ids))


@dataclass(frozen=True, eq=False)
class ModelArchive:
    """姿态字典（所有动作共享）、动作模型、特征配置与部件定义"""
    vocabulary: Tuple[str, ...]
    feature_config: FeatureConfig
    model_config: ModelConfig
    parts: Tuple[PartDefinition, ...]
    poses: Dict[str, PoseModel]
    actions: Dict[str, ActionModel]

    def __post_init__(self):
        for action in self.actions.values():
            missing = [p for p in action.pose_ids if p not in self.poses]
            if missing:
                raise SizeError(f"动作 {action.label} 引用了不存在的姿态: {missing}")
        unknown = sorted(set(self.actions) - set(self.vocabulary))
        if unknown:
            raise SizeError(f"动作模型不在词表中: {unknown}")

    @property
    def pose_ids(self) -> Tuple[str, ...]:
        return tuple(self.poses)

    def summary(self) -> dict:
        return {
            'vocabulary': list(self.vocabulary),
            'num_poses': len(self.poses),
            'poses_per_label': {
                label: sum(1 for p in self.poses.values() if p.label == label)
                for label in self.vocabulary
            },
            'num_actions': len(self.actions),
        }
