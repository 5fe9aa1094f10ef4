"""
动作分类

对视频的每个姿态计算逐帧得分图（按训练响应做 z 分数标准化并折叠到原尺度网格），
与低分辨率特征图一起池化为 73 维金字塔，再用各动作的线性函数打分，取最大者。
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aog import ModelArchive, PoseModel, action_score
from ..core.data_models import VideoSample
from ..core.errors import EmptyInputError
from ..features import FeatureCache, FrameFeatures
from ..schemas.config_schemas import InferenceConfig
from .detection import PoseDetections, detect_poses
from .pyramid import collapse_scales, pyramid_pool, standardize
from .view import estimate_view, majority_view


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VideoPyramids:
    """一段视频的所有池化金字塔"""
    sample_id: str
    pose: Dict[str, np.ndarray]
    lowres: Tuple[np.ndarray, ...]
    view_bin: Optional[int] = None
    num_detections: int = 0

    def vector(self, pose_ids: Sequence[str], num_lowres: int) -> np.ndarray:
        """按动作模型的顺序拼接 [P_1 .. P_Np, L_1 .. L_Nl]"""
        parts = [self.pose[p] for p in pose_ids] + list(self.lowres[:num_lowres])
        return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True)
class Classification:
    sample_id: str
    label: str
    scores: Dict[str, float] = field(default_factory=dict)
    view_bin: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            'sample_id': self.sample_id,
            'label': self.label,
            'scores': dict(self.scores),
            'view_bin': self.view_bin,
        }


def raw_frame_maps(detections: PoseDetections, base_grid) -> List[np.ndarray]:
    """逐帧折叠到原尺度网格的原始姿态得分图（未标准化）"""
    return [collapse_scales(frame.response_map, base_grid) for frame in detections.frames.values()]


def pose_frame_maps(detections: PoseDetections, pose: PoseModel, base_grid) -> List[np.ndarray]:
    """逐帧标准化并折叠到原尺度网格的姿态得分图"""
    return [standardize(m, pose.response_mean, pose.response_std) for m in raw_frame_maps(detections, base_grid)]


def lowres_pyramids(features: Sequence[FrameFeatures]) -> Tuple[np.ndarray, ...]:
    """每个低分辨率通道一个金字塔"""
    if not features or features[0].lowres is None:
        return ()
    stacks = np.stack([f.lowres for f in features])  # (T, C, g, g)
    return tuple(pyramid_pool(list(stacks[:, c])) for c in range(stacks.shape[1]))


def video_pyramids(
    sample: VideoSample,
    archive: ModelArchive,
    cache: FeatureCache,
    config: Optional[InferenceConfig] = None,
    mapper: Optional[Callable] = None,
) -> VideoPyramids:
    """计算视频的所有姿态金字塔与低分辨率金字塔，并给出多数票视角 bin"""
    config = config or InferenceConfig()
    indices = list(range(0, sample.num_frames, config.frame_stride))
    if not indices:
        raise EmptyInputError(f"样本 {sample.sample_id} 没有帧")
    features = cache.video(sample, indices, mapper)
    base_grid = features[indices[0]].base_grid

    poses = list(archive.poses.values())
    run = lambda pose: detect_poses(sample, pose, cache, config, indices)
    results: List[PoseDetections] = mapper(run, poses) if mapper is not None else [run(p) for p in poses]

    pyramids = {}
    per_frame: Dict[int, list] = {index: [] for index in indices}
    for pose, detections in zip(poses, results):
        pyramids[pose.pose_id] = pyramid_pool(pose_frame_maps(detections, pose, base_grid))
        for index, frame in detections.frames.items():
            per_frame[index].extend(frame.detections)

    frame_views = [estimate_view(dets) for dets in per_frame.values() if dets]
    lowres = ()
    if any(a.num_lowres for a in archive.actions.values()):
        lowres = lowres_pyramids([features[i] for i in indices])
    return VideoPyramids(
        sample_id=sample.sample_id,
        pose=pyramids,
        lowres=lowres,
        view_bin=majority_view(frame_views),
        num_detections=sum(len(d) for d in per_frame.values()),
    )


def score_actions(pyramids: VideoPyramids, archive: ModelArchive) -> Dict[str, float]:
    """每个动作节点的得分"""
    return {
        label: action_score(
            [pyramids.pose[p] for p in action.pose_ids],
            list(pyramids.lowres[:action.num_lowres]),
            action,
        )
        for label, action in archive.actions.items()
    }


def decide(scores: Dict[str, float]) -> str:
    """得分最高的动作，得分相同时取字典序最小的标签"""
    return min(scores, key=lambda label: (-scores[label], label))


def classify(
    sample: VideoSample,
    archive: ModelArchive,
    cache: Optional[FeatureCache] = None,
    config: Optional[InferenceConfig] = None,
    mapper: Optional[Callable] = None,
) -> Classification:
    """
    对一段视频分类

    Returns:
        Classification，包含预测标签、各动作得分和多数票视角 bin
    """
    if cache is None:
        cache = FeatureCache(archive.feature_config)
    pyramids = video_pyramids(sample, archive, cache, config, mapper)
    scores = score_actions(pyramids, archive)
    label = decide(scores)
    logger.debug(f"样本 {sample.sample_id} 预测为 {label}")
    return Classification(sample_id=sample.sample_id, label=label, scores=scores, view_bin=pyramids.view_bin)
