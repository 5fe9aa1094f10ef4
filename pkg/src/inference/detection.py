"""
跨视角姿态检测

对每个尺度、每个视角 bin: 根部件响应 + 各子部件响应的距离变换 + 偏置，
姿态得分图为各 bin 得分图的逐点最大值；高于阈值的位置经非极大值抑制后输出为检测结果，
部件位置由距离变换的 argmax 图回溯得到。
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aog import PoseModel, window_anchor
from ..core.data_models import VideoSample
from ..features import FeatureCache, FrameFeatures
from ..geometry import OffsetGaussian2D
from ..schemas.config_schemas import InferenceConfig
from .distance_transform import DEFAULT_DENSE_LIMIT, distance_transform
from .response import FILL_SCORE, ResponseMap, bin_responses, valid_mask


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Detection:
    """一次姿态检测: 根部件位置、尺度、视角 bin、全部部件位置与得分"""
    pose_id: str
    frame: int
    root: Tuple[int, int]
    level: int
    scale: float
    view_bin: int
    theta: float
    part_locations: Tuple[Tuple[int, int], ...]
    score: float
    box: Tuple[float, float, float, float]

    def to_dict(self) -> dict:
        return {
            'pose_id': self.pose_id,
            'frame': self.frame,
            'root': list(self.root),
            'level': self.level,
            'scale': self.scale,
            'view_bin': self.view_bin,
            'theta': self.theta,
            'part_locations': [list(p) for p in self.part_locations],
            'score': self.score,
            'box': list(self.box),
        }


@dataclass(frozen=True, eq=False)
class LevelScores:
    """
    单个尺度的检测结果

    per_bin: (M, G_h, G_w) 每个视角 bin 的视角得分图
    arg_x / arg_y: (M, N, G_h, G_w) 各子部件的最优位置
    """
    scale: float
    per_bin: np.ndarray
    arg_x: np.ndarray
    arg_y: np.ndarray

    @property
    def scores(self) -> np.ndarray:
        return self.per_bin.max(axis=0)

    @property
    def bins(self) -> np.ndarray:
        return self.per_bin.argmax(axis=0)

    def locations(self, view_bin: int, x: int, y: int) -> Tuple[Tuple[int, int], ...]:
        """回溯: 根部件位于 (x, y) 时各部件的位置"""
        children = tuple(
            (int(self.arg_x[view_bin, i, y, x]), int(self.arg_y[view_bin, i, y, x]))
            for i in range(self.arg_x.shape[1])
        )
        return ((int(x), int(y)),) + children


@dataclass(frozen=True, eq=False)
class FrameDetections:
    frame: int
    levels: Tuple[LevelScores, ...]
    detections: Tuple[Detection, ...]
    cell_size: int

    @property
    def response_map(self) -> ResponseMap:
        return ResponseMap(
            levels=tuple(level.scores for level in self.levels),
            scales=tuple(level.scale for level in self.levels),
            cell_size=self.cell_size,
        )


@dataclass(frozen=True, eq=False)
class PoseDetections:
    """一个姿态在一段视频上的逐帧检测结果"""
    pose_id: str
    frames: Dict[int, FrameDetections]

    @property
    def detections(self) -> List[Detection]:
        return [d for frame in self.frames.values() for d in frame.detections]

    @property
    def maps(self) -> Dict[int, ResponseMap]:
        return {index: frame.response_map for index, frame in self.frames.items()}


def bin_offsets(pose: PoseModel) -> List[List[OffsetGaussian2D]]:
    """每个视角 bin 下各子部件的投影偏移"""
    return [pose.projected_offsets(theta) for theta in pose.view_centers]


def score_level(
    stacked: np.ndarray,
    pose: PoseModel,
    scale: float = 1.0,
    method: str = 'diagonal',
    dense_limit: int = DEFAULT_DENSE_LIMIT,
    offsets: Optional[List[List[OffsetGaussian2D]]] = None,
) -> Optional[LevelScores]:
    """
    单个尺度上所有视角 bin 的视角得分图

    Returns:
        None 表示某个部件窗口大于该尺度的网格
    """
    weights = pose.bin_weight_matrix()
    root = bin_responses(stacked, pose.root, weights)
    children = [bin_responses(stacked, child, weights) for child in pose.children]
    if root is None or any(c is None for c in children):
        return None
    if offsets is None:
        offsets = bin_offsets(pose)

    grid = stacked.shape[:2]
    num_bins, num_children = pose.num_bins, len(pose.children)
    per_bin = np.moveaxis(root, 2, 0).copy()
    invalid_root = ~valid_mask(per_bin[0])
    arg_x = np.zeros((num_bins, num_children) + grid, dtype=np.int64)
    arg_y = np.zeros((num_bins, num_children) + grid, dtype=np.int64)
    for m in range(num_bins):
        for i, (child_map, gaussian) in enumerate(zip(children, offsets[m])):
            transformed = distance_transform(child_map[..., m], gaussian, method, dense_limit)
            per_bin[m] += transformed.scores
            arg_x[m, i] = transformed.arg_x
            arg_y[m, i] = transformed.arg_y
    per_bin += pose.bias
    per_bin[:, invalid_root] = FILL_SCORE
    return LevelScores(scale=scale, per_bin=per_bin, arg_x=arg_x, arg_y=arg_y)


def root_box(pose: PoseModel, x: int, y: int, scale: float, cell: int) -> Tuple[float, float, float, float]:
    """根部件窗口在原图中的像素框 (x1, y1, x2, y2)，每个网格元素覆盖 2x2 单元格"""
    h, w = pose.root.window
    ax, ay = window_anchor(pose.root.window)
    x1 = (x - ax) * cell / scale
    y1 = (y - ay) * cell / scale
    return x1, y1, x1 + (w + 1) * cell / scale, y1 + (h + 1) * cell / scale


def box_overlap(a: Sequence[float], b: Sequence[float]) -> float:
    """交并比"""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def non_maximum_suppression(
    detections: Sequence[Detection],
    overlap: float = 0.5,
    limit: Optional[int] = None,
) -> List[Detection]:
    """贪心非极大值抑制: 按得分从高到低保留与已保留框重叠率不超过 overlap 的检测"""
    ordered = sorted(detections, key=lambda d: (-d.score, d.level, d.root[1], d.root[0]))
    kept: List[Detection] = []
    for candidate in ordered:
        if all(box_overlap(candidate.box, k.box) <= overlap for k in kept):
            kept.append(candidate)
            if limit is not None and len(kept) >= limit:
                break
    return kept


def detect_frame(
    features: FrameFeatures,
    pose: PoseModel,
    config: Optional[InferenceConfig] = None,
    frame_index: int = 0,
    offsets: Optional[List[List[OffsetGaussian2D]]] = None,
) -> FrameDetections:
    """在一帧的所有尺度上检测姿态"""
    config = config or InferenceConfig()
    offsets = offsets if offsets is not None else bin_offsets(pose)
    levels: List[LevelScores] = []
    candidates: List[Detection] = []
    for index, level in enumerate(features.levels):
        scored = score_level(
            level.stacked, pose, level.scale, config.dt_method, config.dt_dense_limit, offsets,
        )
        if scored is None:
            continue
        levels.append(scored)
        scores, bins = scored.scores, scored.bins
        for y, x in zip(*np.nonzero(scores > config.detection_threshold)):
            view_bin = int(bins[y, x])
            candidates.append(Detection(
                pose_id=pose.pose_id,
                frame=frame_index,
                root=(int(x), int(y)),
                level=index,
                scale=level.scale,
                view_bin=view_bin,
                theta=float(pose.view_centers[view_bin]),
                part_locations=scored.locations(view_bin, x, y),
                score=float(scores[y, x]),
                box=root_box(pose, int(x), int(y), level.scale, features.cell_size),
            ))
    detections = non_maximum_suppression(candidates, config.nms_overlap, config.max_detections_per_frame)
    return FrameDetections(
        frame=frame_index,
        levels=tuple(levels),
        detections=tuple(detections),
        cell_size=features.cell_size,
    )


def detect_poses(
    sample: VideoSample,
    pose: PoseModel,
    cache: FeatureCache,
    config: Optional[InferenceConfig] = None,
    indices: Optional[Sequence[int]] = None,
    mapper: Optional[Callable] = None,
) -> PoseDetections:
    """
    在视频的每一帧（或 indices 指定的帧）上检测姿态

    Args:
        sample: 视频样本
        pose: 姿态模型
        cache: 帧特征缓存
        config: 推断配置
        indices: 帧号，默认按 frame_stride 采样
        mapper: 保持顺序的并行 map
    """
    config = config or InferenceConfig()
    if indices is None:
        indices = range(0, sample.num_frames, config.frame_stride)
    indices = list(indices)
    features = cache.video(sample, indices, mapper)
    offsets = bin_offsets(pose)
    frames = {
        index: detect_frame(features[index], pose, config, index, offsets)
        for index in indices
    }
    count = sum(len(f.detections) for f in frames.values())
    logger.debug(f"姿态 {pose.pose_id} 在样本 {sample.sample_id} 的 {len(indices)} 帧中检测到 {count} 个目标")
    return PoseDetections(pose_id=pose.pose_id, frames=frames)
