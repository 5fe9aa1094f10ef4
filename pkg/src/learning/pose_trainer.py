"""
姿态检测器训练（隐变量结构化 SVM）

交替进行:
1. 隐变量步: 每个正样本在标注位置附近（半径 latent_radius 个单元格）与标注视角 bin
   附近（±view_radius）搜索得分最高的部件位置与视角；第一次使用标注本身
2. 凸优化步: 固定正样本的隐变量，用随机次梯度下降优化模板、形变精度与偏置；
   负样本的得分始终是在检测距离变换下的最大值

收敛后进行 bootstrap_rounds 轮难负样本自举，每轮加入帧池中得分高于 -1 的位置后重新训练。
每轮记录凸优化步之后的目标函数值，同一轮内单调不增。
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aog import PartModel, PoseModel, extract_patch, view_bin_centers, window_anchor
from ..core.data_models import DEFAULT_PARTS, PartDefinition, VideoSample
from ..core.errors import EmptyInputError
from ..features import FeatureCache
from ..geometry import estimate_offsets, project_offset
from ..mining import PoseCandidate
from ..schemas.config_schemas import RunConfig
from .harvest import TrainExample, model_scale_of, pose_parts
from .latent_svm import convex_step, hinge_slacks, regularization, svm_objective
from .negatives import NegativeSet
from .pose_features import PlacementFeatures, PoseBatch, PoseLayout, placement_features


logger = logging.getLogger(__name__)

HARD_NEGATIVE_THRESHOLD = -1.0


@dataclass
class PoseTrainingReport:
    """训练记录: 每轮自举的目标函数轨迹、负样本数与最终正样本松弛变量"""
    pose_id: str
    num_positives: int
    traces: List[List[float]] = field(default_factory=list)
    num_negatives: List[int] = field(default_factory=list)
    hard_negatives: List[int] = field(default_factory=list)
    slacks: Optional[np.ndarray] = None
    rejected_steps: int = 0

    @property
    def final_objective(self) -> Optional[float]:
        return self.traces[-1][-1] if self.traces and self.traces[-1] else None

    def to_dict(self) -> dict:
        return {
            'pose_id': self.pose_id,
            'num_positives': self.num_positives,
            'traces': self.traces,
            'num_negatives': self.num_negatives,
            'hard_negatives': self.hard_negatives,
            'max_slack': float(self.slacks.max()) if self.slacks is not None and self.slacks.size else None,
            'rejected_steps': self.rejected_steps,
        }


# ============================================================================
# 初始模型
# ============================================================================

def _bin_means(
    pose: PoseModel,
    positives: Sequence[TrainExample],
) -> np.ndarray:
    """视角不共享时每个 bin 单独估计的 2D 偏移均值；没有正样本的 bin 使用 3D 均值的投影"""
    means = np.zeros((pose.num_bins, len(pose.children), 2))
    for m, theta in enumerate(pose.view_centers):
        members = [e for e in positives if e.view_bin == m]
        if members:
            offsets = np.array([
                [np.subtract(loc, e.locations[0]) for loc in e.locations[1:]] for e in members
            ], dtype=np.float64).reshape(len(members), len(pose.children), 2)
            means[m] = offsets.mean(axis=0)
        else:
            params = pose.projection(theta)
            means[m] = [project_offset(c.offset, params, pose.eigen_floor).mean for c in pose.children]
    return means


def initial_pose_model(
    candidate: PoseCandidate,
    positives: Sequence[TrainExample],
    channels: int,
    config: Optional[RunConfig] = None,
    parts: Sequence[PartDefinition] = DEFAULT_PARTS,
) -> PoseModel:
    """
    由挖掘得到的姿态与正样本构造初始模型: 零模板、3D 偏移均值、各向同性初始方差

    Raises:
        EmptyInputError: 没有正样本
    """
    config = config or RunConfig()
    if not positives:
        raise EmptyInputError(f"姿态 {candidate.pose_id} 没有正样本, 无法训练")
    app_dim = 4 * config.features.hog_bins
    mot_dim = channels - app_dim
    num_bins = config.model.num_view_bins
    definitions = pose_parts(candidate, parts)
    offsets = estimate_offsets([e.skeleton for e in positives], definitions, config.geometry.sigma0)

    def make(definition: PartDefinition, window, offset=None) -> PartModel:
        return PartModel.zeros(definition.part_id, window, num_bins, app_dim, mot_dim, offset)

    root = make(definitions[0], config.model.root_window)
    children = tuple(make(d, config.model.part_window, offsets[d.part_id]) for d in definitions[1:])
    pose = PoseModel(
        pose_id=candidate.pose_id,
        label=candidate.label,
        root=root,
        children=children,
        view_centers=view_bin_centers(num_bins),
        model_scale=model_scale_of([e.pixel_scale for e in positives], config.features.cell_size),
        share_views=config.model.share_views,
        items=candidate.item_ids,
        eigen_floor=config.geometry.eigen_floor,
        discrimination=candidate.score,
        projections={f"{e.sample_id}:{e.frame}": e.projection for e in _first_per_sample(positives)},
    )
    if not pose.share_views and pose.children:
        pose = replace(pose, bin_means=_bin_means(pose, positives))
    return pose


def _first_per_sample(positives: Sequence[TrainExample]) -> List[TrainExample]:
    seen, first = set(), []
    for e in positives:
        if e.sample_id not in seen:
            seen.add(e.sample_id)
            first.append(e)
    return first


# ============================================================================
# 隐变量步
# ============================================================================

def _search_offsets(radius: int) -> List[Tuple[int, int]]:
    """(0, 0) 在前，保证得分相同时保留原位置"""
    around = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]
    return [(0, 0)] + [o for o in around if o != (0, 0)]


def _candidates(center: Sequence[int], window: Sequence[int], grid: Tuple[int, int], radius: int) -> np.ndarray:
    h, w = window
    ax, ay = window_anchor(window)
    result = []
    for dx, dy in _search_offsets(radius):
        x, y = center[0] + dx, center[1] + dy
        if ax <= x <= grid[1] - w + ax and ay <= y <= grid[0] - h + ay:
            result.append((x, y))
    return np.array(result, dtype=np.int64).reshape(-1, 2)


def _search_bins(view_bin: int, num_bins: int, view_radius: int) -> List[int]:
    bins = [view_bin]
    for d in range(1, view_radius + 1):
        for b in ((view_bin - d) % num_bins, (view_bin + d) % num_bins):
            if b not in bins:
                bins.append(b)
    return bins


def latent_placement(
    stacked: np.ndarray,
    pose: PoseModel,
    example: TrainExample,
    radius: int = 2,
    view_radius: int = 1,
) -> Tuple[int, Tuple[Tuple[int, int], ...]]:
    """
    在标注附近搜索使视角节点得分最大的视角 bin 与部件位置

    根部件与每个子部件各自在其标注位置的 radius 邻域内搜索；给定根位置时子部件相互独立。
    得分相同时保留标注视角与标注位置。
    """
    grid = stacked.shape[:2]
    roots = _candidates(example.locations[0], pose.root.window, grid, radius)
    root_patches = np.stack([extract_patch(stacked, r, pose.root.window).ravel() for r in roots])
    child_sets = [
        _candidates(location, child.window, grid, radius)
        for child, location in zip(pose.children, example.locations[1:])
    ]
    child_patches = [
        np.stack([extract_patch(stacked, c, child.window).ravel() for c in cands])
        for child, cands in zip(pose.children, child_sets)
    ]

    best = None
    for m in _search_bins(example.view_bin, pose.num_bins, view_radius):
        theta = float(pose.view_centers[m])
        omega = pose.view_weights(theta)
        total = (root_patches @ pose.root.stacked_templates.T) @ omega + pose.bias
        chosen = []
        for child, cands, patches, gaussian in zip(
            pose.children, child_sets, child_patches, pose.projected_offsets(theta),
        ):
            appearance = (patches @ child.stacked_templates.T) @ omega
            delta = cands[None, :, :] - roots[:, None, :] - gaussian.mean
            precision = gaussian.precision
            deformation = -(
                precision[0, 0] * delta[..., 0] ** 2
                + precision[1, 1] * delta[..., 1] ** 2
                + 2.0 * precision[0, 1] * delta[..., 0] * delta[..., 1]
            )
            values = appearance[None, :] + deformation
            index = np.argmax(values, axis=1)
            total = total + values[np.arange(roots.shape[0]), index]
            chosen.append(index)
        r = int(np.argmax(total))
        if best is None or total[r] > best[0]:
            locations = ((int(roots[r, 0]), int(roots[r, 1])),) + tuple(
                (int(cands[i[r], 0]), int(cands[i[r], 1])) for cands, i in zip(child_sets, chosen)
            )
            best = (float(total[r]), m, locations)
    return best[1], best[2]


# ============================================================================
# 训练
# ============================================================================

def _positive_stacked(example: TrainExample, samples: Dict[str, VideoSample], cache: FeatureCache) -> np.ndarray:
    return cache.get(samples[example.sample_id], example.frame).levels[example.level].stacked


def train_pose(
    pose: PoseModel,
    positives: Sequence[TrainExample],
    negatives: NegativeSet,
    samples: Dict[str, VideoSample],
    cache: FeatureCache,
    config: Optional[RunConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[PoseModel, PoseTrainingReport]:
    """
    训练一个姿态检测器

    Args:
        pose: 初始模型（initial_pose_model）
        positives: 正样本
        negatives: 已抽取根部件位置的负样本集合
        samples: sample_id -> VideoSample，用于读取正样本帧特征
        cache: 帧特征缓存
        config: 运行配置
        rng: 随机次梯度的随机源

    Raises:
        EmptyInputError: 没有正样本或负样本
        NumericError: 目标函数非有限
    """
    config = config or RunConfig()
    training = config.training
    rng = rng or np.random.default_rng(config.runtime.seed)
    if not positives:
        raise EmptyInputError(f"姿态 {pose.pose_id} 没有正样本")
    if len(negatives) == 0:
        raise EmptyInputError(f"姿态 {pose.pose_id} 没有负样本")

    layout = PoseLayout(pose)
    lower, upper = layout.bounds(config.geometry.sigma_min)
    w = np.clip(layout.pack(pose), lower, upper)
    report = PoseTrainingReport(pose_id=pose.pose_id, num_positives=len(positives))
    stacked = [_positive_stacked(e, samples, cache) for e in positives]
    latents = [(e.view_bin, e.locations) for e in positives]
    steps = 0

    def positive_features(model: PoseModel) -> List[PlacementFeatures]:
        return [placement_features(s, model, b, locs) for s, (b, locs) in zip(stacked, latents)]

    model = layout.unpack(pose, w)
    pos_features = positive_features(model)
    for round_index in range(training.bootstrap_rounds + 1):
        if round_index > 0:
            hard = negatives.mine_hard(model, HARD_NEGATIVE_THRESHOLD, training.hard_negative_cap)
            added = negatives.add(hard)
            report.hard_negatives.append(added)
            logger.info(f"姿态 {pose.pose_id} 第 {round_index} 轮自举加入 {added} 个难负样本")
        neg_scores, neg_features = negatives.evaluate(model)
        report.num_negatives.append(len(negatives))
        labels = np.concatenate([np.ones(len(positives)), -np.ones(len(negatives))])
        lam = regularization(training.C, labels.size)
        trace: List[float] = []

        for iteration in range(training.latent_iterations):
            if round_index > 0 or iteration > 0:
                latents = [
                    latent_placement(s, model, e, training.latent_radius, training.view_radius)
                    for s, e in zip(stacked, positives)
                ]
                pos_features = positive_features(model)
            batch = PoseBatch(layout, pos_features + neg_features, labels)
            pending = {}

            def objective(candidate: np.ndarray) -> float:
                candidate_model = layout.unpack(pose, candidate)
                scores, features = negatives.evaluate(candidate_model)
                pending['negatives'] = (scores, features)
                pos_scores = batch.scores(candidate, np.arange(len(positives)))
                return svm_objective(candidate, np.concatenate([pos_scores, scores]), labels, lam)

            previous = svm_objective(
                w, np.concatenate([batch.scores(w, np.arange(len(positives))), neg_scores]), labels, lam,
            )
            result = convex_step(
                batch, lam, training.epochs, training.batch_size, rng, w, lower, upper,
                start=steps, objective=objective, previous=previous,
            )
            steps += result.steps
            if result.accepted:
                w = result.weights
                neg_scores, neg_features = pending['negatives']
                model = layout.unpack(pose, w)
            else:
                report.rejected_steps += 1
            trace.append(result.objective)
            logger.debug(
                f"姿态 {pose.pose_id} 轮 {round_index} 迭代 {iteration}: 目标 {result.objective:.6g}"
            )
            if training.tolerance > 0 and len(trace) > 1 and trace[-2] - trace[-1] < training.tolerance:
                break
        report.traces.append(trace)

    latents = [
        latent_placement(s, model, e, training.latent_radius, training.view_radius)
        for s, e in zip(stacked, positives)
    ]
    final = PoseBatch(layout, positive_features(model), np.ones(len(positives)))
    report.slacks = hinge_slacks(final.scores(w), final.labels)
    logger.info(
        f"姿态 {pose.pose_id} 训练完成: 目标 {report.final_objective:.6g}, "
        f"{len(negatives)} 个负样本, 最大松弛 {report.slacks.max():.4g}"
    )
    return model, report
