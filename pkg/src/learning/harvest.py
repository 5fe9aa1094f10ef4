"""
正样本采集

正类视频中骨架配置与姿态距离小于 eta 的帧成为正样本。
部件位置取部件锚点关节的 2D 投影，视角与缩放由归一化骨架和 2D 关节拟合:
归一化时的朝向角与逐帧拟合的视角中残差较小者作为初始视角。

模型尺度 k = 所有正样本像素缩放因子的中位数 / 单元格大小（网格单元 / 归一化单位），
每个正样本在投影尺度最接近 k 的金字塔层上采集。
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..aog import angular_distance, view_bin_centers, window_anchor
from ..core.data_models import DEFAULT_PARTS, ROOT_PART_ID, PartDefinition, Skeleton3D, VideoSample
from ..core.errors import UnderdeterminedError
from ..core.skeleton import normalize_sequence
from ..features import pixel_to_grid, scale_factors
from ..geometry import ProjectionParams, fit_projection, fit_view_angle
from ..mining import PoseCandidate, item_frame_distances
from ..schemas.config_schemas import FeatureConfig, MiningConfig, ModelConfig


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrainExample:
    """
    一个正样本及其标注

    locations: 根部件与各子部件窗口中心在 level 层网格上的位置 (x, y)
    pixel_scale: 拟合得到的像素缩放因子（像素 / 归一化单位）
    """
    sample_id: str
    frame: int
    level: int
    scale: float
    view_bin: int
    theta: float
    locations: Tuple[Tuple[int, int], ...]
    distance: float
    pixel_scale: float
    projection: ProjectionParams
    skeleton: Skeleton3D
    label: int = 1


@dataclass(frozen=True, eq=False)
class _Annotation:
    sample_id: str
    frame: int
    distance: float
    projection: ProjectionParams
    anchors: np.ndarray
    skeleton: Skeleton3D


def pose_parts(candidate: PoseCandidate, parts: Sequence[PartDefinition] = DEFAULT_PARTS) -> Tuple[PartDefinition, ...]:
    """姿态的部件: 躯干（根）在前，其余为部件项所在部件，按部件 ID 排序"""
    lookup = {p.part_id: p for p in parts}
    children = sorted({pid for pid in candidate.part_ids if pid != ROOT_PART_ID})
    return (lookup[ROOT_PART_ID],) + tuple(lookup[pid] for pid in children)


def frame_distances(
    candidate: PoseCandidate,
    sequence: Sequence[Skeleton3D],
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    config: Optional[MiningConfig] = None,
) -> np.ndarray:
    """姿态到序列每一帧的距离 (T,)"""
    total = np.zeros(len(sequence))
    for item in candidate.items:
        total += item_frame_distances(item, sequence, parts, config)
    return total


def fit_frame_projection(skeleton: Skeleton3D, joints2d: np.ndarray, theta_hint: float) -> ProjectionParams:
    """
    用可见关节拟合缩放正交投影（两组点各自去中心）

    Raises:
        UnderdeterminedError: 两种拟合都欠定
    """
    visible = skeleton.visible
    points3d = skeleton.positions[visible]
    points2d = np.asarray(joints2d, dtype=np.float64)[visible]
    points3d = points3d - points3d.mean(axis=0)
    points2d = points2d - points2d.mean(axis=0)
    fits = []
    for fit in (lambda: fit_projection(points3d, points2d, theta_hint), lambda: fit_view_angle(points3d, points2d)):
        try:
            fits.append(fit())
        except UnderdeterminedError as e:
            logger.debug(f"投影拟合失败: {e}")
    if not fits:
        raise UnderdeterminedError("无法由 2D 关节拟合投影")
    return min(fits, key=lambda p: p.residual)


def model_scale_of(pixel_scales: Sequence[float], cell_size: int) -> float:
    """中位像素缩放因子 / 单元格大小"""
    return float(np.median(pixel_scales)) / cell_size


def _grid_shape(frame_shape: Tuple[int, int], scale: float, cell: int) -> Tuple[int, int]:
    rows = int(round(frame_shape[0] * scale)) // cell - 1
    cols = int(round(frame_shape[1] * scale)) // cell - 1
    return rows, cols


def _fits(grid: Tuple[int, int], windows: Sequence[Sequence[int]]) -> bool:
    return all(grid[0] >= h and grid[1] >= w for h, w in windows)


def _clamp(location: np.ndarray, window: Sequence[int], grid: Tuple[int, int]) -> Tuple[int, int]:
    h, w = window
    ax, ay = window_anchor(window)
    x = int(np.clip(int(np.round(location[0])), ax, grid[1] - w + ax))
    y = int(np.clip(int(np.round(location[1])), ay, grid[0] - h + ay))
    return x, y


def _annotate(
    candidate: PoseCandidate,
    sample: VideoSample,
    eta: float,
    pose_part_defs: Sequence[PartDefinition],
    parts: Sequence[PartDefinition],
    mining_config: Optional[MiningConfig],
) -> List[_Annotation]:
    normalized = normalize_sequence(sample.skeletons)
    distances = frame_distances(candidate, normalized.skeletons, parts, mining_config)
    anchors = [p.anchor for p in pose_part_defs]
    annotations = []
    for t in np.flatnonzero(distances < eta):
        t = int(t)
        try:
            projection = fit_frame_projection(normalized.skeletons[t], sample.joints2d[t], normalized.view_angle)
        except UnderdeterminedError:
            logger.debug(f"样本 {sample.sample_id} 第 {t} 帧无法拟合投影, 跳过")
            continue
        annotations.append(_Annotation(
            sample_id=sample.sample_id,
            frame=t,
            distance=float(distances[t]),
            projection=projection,
            anchors=np.asarray(sample.joints2d[t], dtype=np.float64)[anchors],
            skeleton=normalized.skeletons[t],
        ))
    return annotations


def harvest_positives(
    candidate: PoseCandidate,
    samples: Sequence[VideoSample],
    eta: float,
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    model_config: Optional[ModelConfig] = None,
    feature_config: Optional[FeatureConfig] = None,
    mining_config: Optional[MiningConfig] = None,
    max_positives: Optional[int] = None,
) -> List[TrainExample]:
    """
    采集姿态的正样本

    Args:
        candidate: 挖掘得到的姿态（label 为其所属类别）
        samples: 训练视频，只使用 label 类别且带骨架与 2D 关节的视频
        eta: 距离阈值（严格小于）
        max_positives: 数量上限，超出时保留距离最小的

    Returns:
        正样本列表；没有正样本时返回空列表并记录警告
    """
    model_config = model_config or ModelConfig()
    feature_config = feature_config or FeatureConfig()
    pose_part_defs = pose_parts(candidate, parts)
    annotations: List[_Annotation] = []
    frame_shapes = {}
    for sample in samples:
        if sample.action != candidate.label or not sample.has_skeletons:
            continue
        if sample.joints2d is None:
            logger.debug(f"样本 {sample.sample_id} 没有 2D 关节, 不参与正样本采集")
            continue
        found = _annotate(candidate, sample, eta, pose_part_defs, parts, mining_config)
        if found:
            frame_shapes[sample.sample_id] = sample.frame(found[0].frame).shape[:2]
        annotations.extend(found)

    if max_positives is not None and len(annotations) > max_positives:
        order = sorted(range(len(annotations)), key=lambda i: (annotations[i].distance, i))[:max_positives]
        annotations = [annotations[i] for i in sorted(order)]
    if not annotations:
        logger.warning(f"姿态 {candidate.pose_id} 没有距离小于 {eta} 的正样本")
        return []

    cell = feature_config.cell_size
    scales = scale_factors(feature_config)
    k_model = model_scale_of([a.projection.k1 for a in annotations], cell)
    centers = view_bin_centers(model_config.num_view_bins)
    windows = [tuple(model_config.root_window)] + [tuple(model_config.part_window)] * (len(pose_part_defs) - 1)

    examples = []
    for annotation in annotations:
        pixel_scale = annotation.projection.k1
        shape = frame_shapes[annotation.sample_id]
        order = sorted(
            range(len(scales)),
            key=lambda i: abs(np.log(pixel_scale * scales[i] / cell) - np.log(k_model)),
        )
        level = next((i for i in order if _fits(_grid_shape(shape, scales[i], cell), windows)), None)
        if level is None:
            logger.debug(f"样本 {annotation.sample_id} 第 {annotation.frame} 帧在所有尺度上都放不下部件窗口")
            continue
        scale = scales[level]
        grid = _grid_shape(shape, scale, cell)
        locations = tuple(
            _clamp(np.array([pixel_to_grid(a[0], scale, cell), pixel_to_grid(a[1], scale, cell)]), window, grid)
            for a, window in zip(annotation.anchors, windows)
        )
        theta = annotation.projection.theta
        examples.append(TrainExample(
            sample_id=annotation.sample_id,
            frame=annotation.frame,
            level=level,
            scale=scale,
            view_bin=int(np.argmin(angular_distance(theta, centers))),
            theta=theta,
            locations=locations,
            distance=annotation.distance,
            pixel_scale=pixel_scale,
            projection=annotation.projection,
            skeleton=annotation.skeleton,
        ))
    logger.info(f"姿态 {candidate.pose_id}: 采集到 {len(examples)} 个正样本, 模型尺度 {k_model:.3f} 单元格/单位")
    return examples
