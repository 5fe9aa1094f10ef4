"""
训练流水线

    划分拟合 / 验证视频
      -> 姿态挖掘（部件聚类、Apriori 搜索、集合覆盖剪枝）
      -> 每个姿态: 采集正样本、抽取负样本、隐变量 SVM 训练
      -> 在训练视频上检测: 响应标准化统计、验证 AP 剪枝
      -> 金字塔池化 -> 动作 SVM
      -> 模型存档

每个姿态检测器用由种子派生的独立随机源训练，并行时结果按姿态顺序收集，保证同种子可复现。
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aog import ModelArchive, PoseModel, round_action, round_templates
from ..core.data_models import DEFAULT_PARTS, Dataset, PartDefinition, VideoSample
from ..core.errors import EmptyInputError
from ..features import FeatureCache
from ..inference import detect_poses, lowres_pyramids, pyramid_pool, raw_frame_maps, standardize
from ..inference.response import valid_mask
from ..mining import (
    ActivationIndex,
    PoseCandidate,
    build_corpus,
    cluster_parts,
    collect_part_examples,
    mine_poses,
    prune_by_validation,
    prune_poses,
    validation_ap,
)
from ..runner import stage_scope
from ..schemas.config_schemas import RunConfig
from ..streaming.event_log import EventAction, EventCategory, EventLog
from .action_svm import train_action
from .harvest import harvest_positives
from .negatives import NegativeSet, negative_frame_pool
from .pose_trainer import PoseTrainingReport, initial_pose_model, train_pose


logger = logging.getLogger(__name__)

Mapper = Callable[[Callable, Sequence], List]


def _serial(fn: Callable, items: Sequence) -> List:
    return [fn(item) for item in items]


@dataclass
class TrainingReport:
    """一次训练的汇总"""
    num_fit: int = 0
    num_validation: int = 0
    mined: Dict[str, int] = field(default_factory=dict)
    covered: Dict[str, int] = field(default_factory=dict)
    poses: List[PoseTrainingReport] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    validation: Dict[str, float] = field(default_factory=dict)
    removed: List[str] = field(default_factory=list)
    actions: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'num_fit': self.num_fit,
            'num_validation': self.num_validation,
            'mined': dict(self.mined),
            'covered': dict(self.covered),
            'poses': [p.to_dict() for p in self.poses],
            'skipped': list(self.skipped),
            'validation': dict(self.validation),
            'removed': list(self.removed),
            'actions': list(self.actions),
        }


@dataclass(frozen=True, eq=False)
class VideoResponse:
    """一个姿态在一段视频上的原始逐帧得分图（折叠到原尺度）与最大得分"""
    maps: Tuple[np.ndarray, ...]
    best: float


# ==================== 划分 ====================

def split_validation(
    dataset: Dataset,
    fraction: float,
    rng: np.random.Generator,
) -> Tuple[Dataset, Dataset]:
    """
    按类别分层抽取验证视频（每类至少保留一段拟合视频）

    Returns:
        (拟合集, 验证集)
    """
    validation_ids = set()
    if fraction > 0:
        for label in dataset.vocabulary:
            members = [s.sample_id for s in dataset.samples if s.action == label]
            count = min(int(np.floor(len(members) * fraction)), len(members) - 1)
            if count > 0:
                chosen = rng.choice(len(members), size=count, replace=False)
                validation_ids.update(members[i] for i in chosen)
    fit = tuple(s for s in dataset.samples if s.sample_id not in validation_ids)
    validation = tuple(s for s in dataset.samples if s.sample_id in validation_ids)
    return (
        replace(dataset, samples=fit),
        replace(dataset, samples=validation),
    )


# ==================== 挖掘 ====================

def mine_stage(
    dataset: Dataset,
    config: RunConfig,
    rng: np.random.Generator,
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
    events: Optional[EventLog] = None,
) -> Tuple[Dict[str, List[PoseCandidate]], Dict[str, int]]:
    """
    挖掘并用集合覆盖剪枝

    某类没有挖掘到姿态时退回到该类判别度最高的单部件项姿态。

    Returns:
        (类别 -> 剪枝后的姿态, 类别 -> 剪枝前的数量)

    Raises:
        EmptyInputError: 数据集为空、缺少骨架或没有任何部件项
    """
    mining = config.mining
    corpus = build_corpus(dataset, mining.frame_stride)
    examples = collect_part_examples(corpus, parts, mining.max_examples_per_part, rng)

    items = {}
    for part_id, part_examples in examples.items():
        items[part_id] = cluster_parts(part_examples, mining, seed=config.runtime.seed) if len(part_examples) >= 2 else []
        logger.debug(f"部件 {part_id}: {len(part_examples)} 个样本, {len(items[part_id])} 个部件项")
    all_items = [item for part_items in items.values() for item in part_items]
    if not all_items:
        raise EmptyInputError("没有任何部件项, 无法挖掘姿态")

    index = ActivationIndex(corpus, all_items, parts, mining)
    mined = mine_poses(items, corpus, parts, mining, index)
    for label in corpus.vocabulary:
        if mined.get(label):
            continue
        singles = sorted(
            (index.candidate(frozenset([item_id]), label) for item_id in sorted(index.items)),
            key=lambda c: (-c.score, c.pose_id),
        )
        if singles:
            logger.warning(f"类别 {label} 没有满足阈值的姿态, 使用判别度最高的单部件项 {singles[0].pose_id}")
            mined[label] = [singles[0]]

    counts = {label: len(poses) for label, poses in mined.items()}
    covered = prune_poses(mined, mining)
    if events is not None:
        for label, poses in covered.items():
            events.emit('mine', EventCategory.MINING, EventAction.STEP, {
                'label': label,
                'mined': counts.get(label, 0),
                'kept': [p.pose_id for p in poses],
            })
    return covered, counts


# ==================== 姿态检测器 ====================

def _train_one(
    job: Tuple[int, PoseCandidate],
    fit: Dataset,
    cache: FeatureCache,
    config: RunConfig,
    parts: Sequence[PartDefinition],
) -> Optional[Tuple[PoseModel, PoseTrainingReport]]:
    index, candidate = job
    training = config.training
    rng = np.random.default_rng([config.runtime.seed, index])
    positives = harvest_positives(
        candidate, fit.samples, training.eta, parts,
        config.model, config.features, config.mining, training.max_positives,
    )
    if not positives:
        return None
    samples = {s.sample_id: s for s in fit.samples}
    first = positives[0]
    channels = cache.get(samples[first.sample_id], first.frame).channels
    pose = initial_pose_model(candidate, positives, channels, config, parts)

    pool = negative_frame_pool(fit.samples, candidate.label, training.negative_frames, rng, config.inference.frame_stride)
    negatives = NegativeSet(pool, cache, config.inference)
    negatives.sample_roots(config.model.root_window, training.num_negatives, rng)
    model, report = train_pose(pose, positives, negatives, samples, cache, config, rng)
    return round_templates(model), report


def video_responses(
    pose: PoseModel,
    samples: Sequence[VideoSample],
    cache: FeatureCache,
    config: RunConfig,
) -> Dict[str, VideoResponse]:
    """姿态在每段视频上的原始逐帧得分图"""
    responses = {}
    for sample in samples:
        indices = list(range(0, sample.num_frames, config.inference.frame_stride))
        base_grid = cache.get(sample, indices[0]).base_grid
        detections = detect_poses(sample, pose, cache, config.inference, indices)
        maps = tuple(raw_frame_maps(detections, base_grid))
        valid = [m[valid_mask(m)] for m in maps]
        values = np.concatenate(valid) if valid else np.zeros(0)
        responses[sample.sample_id] = VideoResponse(maps=maps, best=float(values.max()) if values.size else -np.inf)
    return responses


def response_statistics(responses: Sequence[VideoResponse]) -> Tuple[float, float]:
    """有效位置得分的均值与标准差（标准差过小时取 1）"""
    values = [m[valid_mask(m)] for r in responses for m in r.maps]
    values = np.concatenate(values) if values else np.zeros(0)
    if values.size == 0:
        return 0.0, 1.0
    std = float(values.std())
    return float(values.mean()), std if std > 1e-12 else 1.0


# ==================== 流水线 ====================

def train_pipeline(
    dataset: Dataset,
    config: Optional[RunConfig] = None,
    cache: Optional[FeatureCache] = None,
    mapper: Optional[Mapper] = None,
    events: Optional[EventLog] = None,
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
) -> Tuple[ModelArchive, TrainingReport]:
    """
    在训练集上训练完整模型

    Args:
        dataset: 训练集（带骨架与 2D 关节）
        config: 运行配置
        cache: 帧特征缓存（默认新建）
        mapper: 有序并行映射 (fn, items) -> list，默认顺序执行
        events: 阶段事件日志

    Returns:
        (模型存档, 训练汇总)

    Raises:
        EmptyInputError: 没有可训练的姿态或类别不足
    """
    config = config or RunConfig()
    cache = cache or FeatureCache(config.features, config.runtime.cache_frames)
    mapper = mapper or _serial
    rng = np.random.default_rng(config.runtime.seed)
    report = TrainingReport()

    with stage_scope('split', events) as stats:
        fit, validation = split_validation(dataset, config.training.validation_fraction, rng)
        report.num_fit, report.num_validation = len(fit), len(validation)
        stats.update(fit=len(fit), validation=len(validation))

    with stage_scope('mine', events) as stats:
        covered, report.mined = mine_stage(fit, config, rng, parts, events)
        report.covered = {label: len(poses) for label, poses in covered.items()}
        stats.update(mined=report.mined, covered=report.covered)

    candidates = [c for label in dataset.vocabulary for c in covered.get(label, [])]
    with stage_scope('train-poses', events, poses=len(candidates)) as stats:
        results = mapper(lambda job: _train_one(job, fit, cache, config, parts), list(enumerate(candidates)))
        trained: List[PoseModel] = []
        for candidate, result in zip(candidates, results):
            if result is None:
                logger.warning(f"姿态 {candidate.pose_id} 没有正样本, 跳过")
                report.skipped.append(candidate.pose_id)
                if events is not None:
                    events.emit('train-poses', EventCategory.TRAINING, EventAction.SKIPPED, {'pose_id': candidate.pose_id})
                continue
            model, pose_report = result
            trained.append(model)
            report.poses.append(pose_report)
            if events is not None:
                events.emit('train-poses', EventCategory.TRAINING, EventAction.STEP, pose_report.to_dict())
        if not trained:
            raise EmptyInputError("没有任何姿态采集到正样本")
        stats.update(trained=len(trained), skipped=len(report.skipped))

    train_videos = list(fit.samples) + list(validation.samples)
    with stage_scope('respond', events) as stats:
        responses = mapper(lambda pose: video_responses(pose, train_videos, cache, config), trained)
        finalized = []
        for pose, by_video in zip(trained, responses):
            mean, std = response_statistics([by_video[s.sample_id] for s in fit.samples])
            ap = None
            if len(validation):
                ap = validation_ap(
                    [by_video[s.sample_id].best for s in validation.samples],
                    [s.action == pose.label for s in validation.samples],
                )
                report.validation[pose.pose_id] = ap
            finalized.append(replace(pose, response_mean=mean, response_std=std, validation_ap=ap))
        if len(validation):
            finalized, removed = prune_by_validation(finalized, config.mining.validation_floor)
            report.removed = [p.pose_id for p in removed]
            if events is not None:
                for pose in removed:
                    events.emit('respond', EventCategory.MINING, EventAction.SKIPPED, {
                        'pose_id': pose.pose_id,
                        'validation_ap': pose.validation_ap,
                    })
        stats.update(kept=len(finalized), removed=len(report.removed))

    responses_by_pose = {pose.pose_id: by_video for pose, by_video in zip(trained, responses)}
    with stage_scope('train-actions', events) as stats:
        rows, num_lowres = [], 0
        for sample in train_videos:
            pyramids = [
                pyramid_pool([
                    standardize(m, pose.response_mean, pose.response_std)
                    for m in responses_by_pose[pose.pose_id][sample.sample_id].maps
                ])
                for pose in finalized
            ]
            if config.model.use_lowres:
                indices = range(0, sample.num_frames, config.inference.frame_stride)
                lowres = lowres_pyramids([cache.get(sample, i) for i in indices])
                num_lowres = len(lowres)
                pyramids.extend(lowres)
            rows.append(np.concatenate(pyramids))
        trained_actions = train_action(
            np.stack(rows),
            [s.action for s in train_videos],
            dataset.vocabulary,
            [p.pose_id for p in finalized],
            num_lowres,
            config.training,
        )
        actions = {label: round_action(action) for label, action in trained_actions.items()}
        report.actions = list(actions)
        stats.update(actions=report.actions, num_lowres=num_lowres)

    archive = ModelArchive(
        vocabulary=tuple(dataset.vocabulary),
        feature_config=config.features,
        model_config=config.model,
        parts=tuple(parts),
        poses={pose.pose_id: pose for pose in finalized},
        actions=actions,
    )
    logger.info(f"训练完成: {len(archive.poses)} 个姿态, {len(actions)} 个动作")
    return archive, report
