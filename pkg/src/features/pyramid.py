"""
逐帧特征金字塔

每帧在 num_scales 个尺度上计算 HOG 与 HOF（光流在原分辨率计算一次，再按尺度重采样），
同一尺度下两者网格一致，拼接成 (grid_h, grid_w, D_hog + D_hof) 的 float32 数组。

网格坐标约定: 尺度 s 下网格元素 g 的中心像素为 (g + 1) * cell / s。
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..core.data_models import VideoSample
from ..core.errors import SizeError
from ..schemas.config_schemas import FeatureConfig
from .flow import FlowField, compute_flow
from .hof import compute_hof
from .hog import BLOCK_CELLS, FeatureMap, compute_hog, to_gray
from .lowres import lowres_maps


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScaleLevel:
    """单个尺度的外观 / 运动特征"""
    scale: float
    hog: FeatureMap
    hof: FeatureMap
    stacked: np.ndarray

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.stacked.shape[0], self.stacked.shape[1]


@dataclass(frozen=True, eq=False)
class FrameFeatures:
    """一帧的多尺度特征与低分辨率响应图"""
    levels: Tuple[ScaleLevel, ...]
    frame_shape: Tuple[int, int]
    cell_size: int
    lowres: Optional[np.ndarray] = None

    @property
    def channels(self) -> int:
        return self.levels[0].stacked.shape[2]

    @property
    def base_grid(self) -> Tuple[int, int]:
        return self.levels[0].grid_shape


def scale_factors(config: FeatureConfig) -> Tuple[float, ...]:
    return tuple(config.scale_step ** (-k) for k in range(config.num_scales))


def grid_to_pixel(index: float, scale: float, cell: int) -> float:
    """网格索引 -> 原图像素坐标"""
    return (index + 1.0) * cell / scale


def pixel_to_grid(pixel: float, scale: float, cell: int) -> float:
    """原图像素坐标 -> 网格索引（未取整）"""
    return pixel * scale / cell - 1.0


def resize_frame(frame: np.ndarray, scale: float) -> np.ndarray:
    if scale == 1.0:
        return frame
    shape = (int(round(frame.shape[0] * scale)), int(round(frame.shape[1] * scale)))
    zoom = (shape[0] / frame.shape[0], shape[1] / frame.shape[1])
    return ndimage.zoom(frame, zoom, order=1, mode='nearest')


def compute_frame_features(
    frame: np.ndarray,
    flow: FlowField,
    config: FeatureConfig,
    box=None,
    with_lowres: bool = True,
) -> FrameFeatures:
    """
    计算一帧的特征金字塔

    尺寸小于一个块的尺度被跳过；原始尺度不足一个块时抛出 SizeError。
    """
    frame = to_gray(frame)
    cell = config.cell_size
    levels = []
    for scale in scale_factors(config):
        image = resize_frame(frame, scale)
        if min(image.shape) < BLOCK_CELLS * cell:
            if not levels:
                raise SizeError(f"帧尺寸 {frame.shape} 小于一个 HOG 块")
            break
        hog = compute_hog(image, cell, config.hog_bins, config.block_eps)
        hof = compute_hof(
            flow.resized(image.shape), cell, config.hof_bins,
            config.motion_threshold, config.block_eps,
        )
        stacked = np.concatenate([hog.descriptors, hof.descriptors], axis=2).astype(np.float32)
        levels.append(ScaleLevel(scale=scale, hog=hog, hof=hof, stacked=stacked))

    lowres = None
    if with_lowres:
        lowres = lowres_maps(frame, box, config.histogram_bins, config.lowres_grid)
    return FrameFeatures(
        levels=tuple(levels),
        frame_shape=frame.shape,
        cell_size=cell,
        lowres=lowres,
    )


def frame_flow(sample: VideoSample, index: int, config: FeatureConfig) -> FlowField:
    """第 index 帧的光流: 与下一帧之间；最后一帧取与上一帧之间"""
    count = sample.num_frames
    if count < 2:
        return FlowField.zeros(to_gray(sample.frame(index)).shape)
    first, second = (index, index + 1) if index + 1 < count else (index - 1, index)
    return compute_flow(
        sample.frame(first),
        sample.frame(second),
        alpha=config.flow_alpha,
        iterations=config.flow_iterations,
        levels=config.flow_levels,
        max_flow=config.flow_max,
    )


def sample_frame_features(sample: VideoSample, index: int, config: FeatureConfig) -> FrameFeatures:
    return compute_frame_features(
        sample.frame(index),
        frame_flow(sample, index, config),
        config,
        box=sample.box(index),
    )


class FeatureCache:
    """
    按 (样本 ID, 帧号) 缓存帧特征

    多个工作线程可以共享；同一帧只计算一次。给定 max_frames 时按最近最少使用淘汰，
    被淘汰的帧再次访问时重新计算。
    """

    def __init__(self, config: FeatureConfig, max_frames: Optional[int] = None):
        if max_frames is not None and max_frames < 1:
            raise ValueError(f"max_frames 必须为正, 得到 {max_frames}")
        self.config = config
        self.max_frames = max_frames
        self._lock = threading.Lock()
        self._entries: 'OrderedDict[Tuple[str, int], FrameFeatures]' = OrderedDict()
        self._pending: Dict[Tuple[str, int], threading.Event] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: Tuple[str, int]) -> bool:
        return key in self._entries

    def get(self, sample: VideoSample, index: int) -> FrameFeatures:
        key = (sample.sample_id, index)
        while True:
            with self._lock:
                if key in self._entries:
                    self._entries.move_to_end(key)
                    return self._entries[key]
                event = self._pending.get(key)
                if event is None:
                    event = threading.Event()
                    self._pending[key] = event
                    owner = True
                else:
                    owner = False
            if not owner:
                event.wait()
                continue
            try:
                features = sample_frame_features(sample, index, self.config)
                with self._lock:
                    self._entries[key] = features
                    while self.max_frames is not None and len(self._entries) > self.max_frames:
                        self._entries.popitem(last=False)
                return features
            finally:
                with self._lock:
                    self._pending.pop(key, None)
                event.set()

    def video(
        self,
        sample: VideoSample,
        indices: Optional[Sequence[int]] = None,
        mapper: Optional[Callable] = None,
    ) -> Dict[int, FrameFeatures]:
        """一段视频（或其中若干帧）的特征，mapper 用于并行计算，需保持输入顺序"""
        if indices is None:
            indices = range(sample.num_frames)
        indices = list(indices)
        compute = lambda i: self.get(sample, i)
        results = mapper(compute, indices) if mapper is not None else [compute(i) for i in indices]
        return dict(zip(indices, results))

    def evict(self, sample_id: str) -> None:
        with self._lock:
            for key in [k for k in self._entries if k[0] == sample_id]:
                del self._entries[key]

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
