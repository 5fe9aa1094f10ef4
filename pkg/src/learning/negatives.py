"""
负样本

负样本池是从负类视频中随机抽取的若干帧。每个负样本固定一帧、一个尺度层和根部件位置，
视角 bin 与子部件位置在当前模型下用检测时的距离变换取最大（难负样本需要最大化而不是采样）。
自举时在整个帧池上收集得分高于阈值的位置作为新的难负样本。
"""

import logging
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aog import PoseModel, window_anchor
from ..core.data_models import VideoSample
from ..core.errors import EmptyInputError
from ..features import FeatureCache
from ..inference import LevelScores, score_level
from ..inference.response import valid_mask
from ..schemas.config_schemas import InferenceConfig
from .pose_features import PlacementFeatures, placement_features


logger = logging.getLogger(__name__)

# (帧池索引, 尺度层, x, y)
NegativeRoot = Tuple[int, int, int, int]


def negative_frame_pool(
    samples: Sequence[VideoSample],
    label: str,
    count: int,
    rng: np.random.Generator,
    stride: int = 1,
) -> List[Tuple[VideoSample, int]]:
    """
    从非 label 类视频中无放回抽取 count 帧（按视频顺序与帧号排序）

    Raises:
        EmptyInputError: 没有负类视频帧
    """
    frames = [
        (sample, t)
        for sample in samples if sample.action != label
        for t in range(0, sample.num_frames, stride)
    ]
    if not frames:
        raise EmptyInputError(f"类别 {label} 没有负样本视频")
    if len(frames) > count:
        chosen = np.sort(rng.choice(len(frames), size=count, replace=False))
        frames = [frames[i] for i in chosen]
    return frames


def _root_centers(window: Sequence[int], grid: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    h, w = window
    ax, ay = window_anchor(window)
    return np.arange(grid[1] - w + 1) + ax, np.arange(grid[0] - h + 1) + ay


class NegativeSet:
    """负样本帧池与其中的负样本根部件位置"""

    def __init__(
        self,
        frames: Sequence[Tuple[VideoSample, int]],
        cache: FeatureCache,
        config: Optional[InferenceConfig] = None,
    ):
        self.frames = list(frames)
        self.cache = cache
        self.config = config or InferenceConfig()
        self.roots: List[NegativeRoot] = []
        self._known = set()

    def __len__(self) -> int:
        return len(self.roots)

    def add(self, roots: Sequence[NegativeRoot]) -> int:
        added = 0
        for root in roots:
            if root not in self._known:
                self._known.add(root)
                self.roots.append(root)
                added += 1
        return added

    def features(self, index: int):
        sample, t = self.frames[index]
        return self.cache.get(sample, t)

    def sample_roots(self, window: Sequence[int], count: int, rng: np.random.Generator) -> int:
        """在帧池中均匀抽取 count 个根部件位置（帧、可放下窗口的尺度层、位置依次均匀抽取）"""
        h, w = window
        drawn = []
        for _ in range(count):
            index = int(rng.integers(len(self.frames)))
            levels = [
                i for i, level in enumerate(self.features(index).levels)
                if level.grid_shape[0] >= h and level.grid_shape[1] >= w
            ]
            if not levels:
                continue
            level = levels[int(rng.integers(len(levels)))]
            xs, ys = _root_centers(window, self.features(index).levels[level].grid_shape)
            drawn.append((index, level, int(xs[rng.integers(xs.size)]), int(ys[rng.integers(ys.size)])))
        return self.add(drawn)

    def _score(self, pose: PoseModel, index: int, level: int) -> Optional[LevelScores]:
        stacked = self.features(index).levels[level].stacked
        return score_level(stacked, pose, 1.0, self.config.dt_method, self.config.dt_dense_limit)

    def evaluate(self, pose: PoseModel) -> Tuple[np.ndarray, List[PlacementFeatures]]:
        """
        每个负样本在 pose 下的最大得分及取得最大值的配置特征
        """
        groups: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for n, (index, level, _, _) in enumerate(self.roots):
            groups[(index, level)].append(n)
        scores = np.zeros(len(self.roots))
        features: List[Optional[PlacementFeatures]] = [None] * len(self.roots)
        for (index, level), members in groups.items():
            scored = self._score(pose, index, level)
            stacked = self.features(index).levels[level].stacked
            for n in members:
                _, _, x, y = self.roots[n]
                view_bin = int(scored.bins[y, x])
                scores[n] = float(scored.scores[y, x])
                features[n] = placement_features(stacked, pose, view_bin, scored.locations(view_bin, x, y))
        return scores, features

    def mine_hard(self, pose: PoseModel, threshold: float = -1.0, cap: int = 1000) -> List[NegativeRoot]:
        """帧池中得分高于 threshold 且尚未在集合中的位置，按得分降序最多 cap 个"""
        found = []
        for index in range(len(self.frames)):
            for level in range(len(self.features(index).levels)):
                scored = self._score(pose, index, level)
                if scored is None:
                    continue
                scores = scored.scores
                hits = valid_mask(scores) & (scores > threshold)
                for y, x in zip(*np.nonzero(hits)):
                    root = (index, level, int(x), int(y))
                    if root not in self._known:
                        found.append((-float(scores[y, x]), root))
        found.sort()
        return [root for _, root in found[:cap]]
