"""
推断测试: 距离变换、跨视角检测、视角估计、金字塔池化与动作分类
"""

from dataclasses import replace

import numpy as np
import pytest

from src.aog import (
    PYRAMID_DIM,
    ActionModel,
    ModelArchive,
    PartModel,
    extract_patch,
    pose_score,
    round_templates,
    view_score,
)
from src.core import DEFAULT_PARTS, EmptyInputError, SizeError, VideoSample
from src.features import FeatureCache, FeatureMap, FrameFeatures, ScaleLevel
from src.geometry import OffsetGaussian2D
from src.inference import (
    FILL_SCORE,
    Detection,
    ResponseMap,
    classify,
    collapse_scales,
    decide,
    detect_poses,
    distance_transform,
    envelope_max,
    estimate_view,
    majority_view,
    non_maximum_suppression,
    part_response,
    pyramid_pool,
    score_level,
    standardize,
)
from src.schemas.config_schemas import FeatureConfig, InferenceConfig, ModelConfig


def _brute_force(child, gaussian):
    precision = np.linalg.inv(gaussian.cov)
    height, width = child.shape
    ys, xs = np.mgrid[0:height, 0:width]
    out = np.empty_like(child)
    for y0 in range(height):
        for x0 in range(width):
            dx = xs - x0 - gaussian.mean[0]
            dy = ys - y0 - gaussian.mean[1]
            quad = precision[0, 0] * dx ** 2 + precision[1, 1] * dy ** 2 + 2 * precision[0, 1] * dx * dy
            out[y0, x0] = np.max(child - quad)
    return out


# ==================== 距离变换 ====================

@pytest.mark.parametrize('n', [1, 2, 7, 40])
def test_envelope_matches_exhaustive_search(n):
    rng = np.random.default_rng(n)
    values = rng.normal(size=n) * 3
    queries = rng.uniform(-2, n + 2, size=25)
    best, arg = envelope_max(values, 0.7, queries)
    brute = values[None, :] - 0.7 * (np.arange(n)[None, :] - queries[:, None]) ** 2
    np.testing.assert_allclose(best, brute.max(axis=1))
    np.testing.assert_allclose(values[arg] - 0.7 * (arg - queries) ** 2, best)


def _random_maps(seed, count=200, max_side=9):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        height, width = rng.integers(1, max_side + 1, size=2)
        yield rng, rng.normal(size=(height, width)) * 4


@pytest.mark.parametrize('dense_limit', [0, 64])
def test_diagonal_transform_is_exact_for_diagonal_covariance(dense_limit):
    for rng, child in _random_maps(10 + dense_limit):
        gaussian = OffsetGaussian2D(mean=rng.uniform(-3, 3, size=2), cov=np.diag(rng.uniform(0.1, 5.0, size=2)))
        transformed = distance_transform(child, gaussian, 'diagonal', dense_limit)
        np.testing.assert_allclose(transformed.scores, _brute_force(child, gaussian), rtol=0, atol=1e-9)


@pytest.mark.parametrize('dense_limit', [0, 64])
def test_exact_transform_handles_correlation(dense_limit):
    for rng, child in _random_maps(20 + dense_limit):
        a = rng.normal(size=(2, 2))
        gaussian = OffsetGaussian2D(mean=rng.uniform(-3, 3, size=2), cov=a @ a.T + 0.2 * np.eye(2))
        transformed = distance_transform(child, gaussian, 'exact', dense_limit)
        np.testing.assert_allclose(transformed.scores, _brute_force(child, gaussian), rtol=0, atol=1e-9)

        # argmax 图回溯出的位置取得同样的得分
        precision = np.linalg.inv(gaussian.cov)
        height, width = child.shape
        ys, xs = np.mgrid[0:height, 0:width]
        d = np.stack([transformed.arg_x - xs, transformed.arg_y - ys], axis=-1) - gaussian.mean
        traced = child[transformed.arg_y, transformed.arg_x] - np.einsum('...i,ij,...j->...', d, precision, d)
        np.testing.assert_allclose(traced, transformed.scores, rtol=0, atol=1e-9)


def test_unknown_transform_method():
    with pytest.raises(ValueError):
        distance_transform(np.zeros((3, 3)), OffsetGaussian2D([0, 0], np.eye(2)), 'approximate')


# ==================== 部件响应图 ====================

def _frame_features(*grids):
    levels = tuple(
        ScaleLevel(
            scale=0.5 ** i,
            hog=FeatureMap(grid[..., :8], cell_size=8),
            hof=FeatureMap(grid[..., 8:], cell_size=8, kind='hof'),
            stacked=grid,
        )
        for i, grid in enumerate(grids)
    )
    return FrameFeatures(levels=levels, frame_shape=(64, 64), cell_size=8)


def test_delta_template_selects_feature_channel():
    grid = np.random.default_rng(8).normal(size=(5, 6, 12))
    app = np.zeros((1, 1, 1, 8))
    app[0, 0, 0, 2] = 1.0
    part = PartModel(part_id=1, window=(1, 1), app_templates=app, mot_templates=np.zeros((1, 1, 1, 4)))
    response = part_response(_frame_features(grid), part, 0.0)
    assert response.num_levels == 1 and response.cell_size == 8
    np.testing.assert_allclose(response.levels[0], grid[..., 2])


def test_part_response_skips_levels_smaller_than_window():
    part = PartModel.zeros(0, (2, 2), num_bins=4, app_dim=8, mot_dim=4)
    features = _frame_features(np.ones((5, 6, 12)), np.ones((1, 3, 12)))
    response = part_response(features, part, np.pi / 3)
    assert response.scales == (1.0,)
    scores = response.levels[0]
    assert np.all(scores[1:, 1:] == 0.0)
    assert np.all(scores[0, :] == FILL_SCORE) and np.all(scores[:, 0] == FILL_SCORE)


def test_detect_poses_on_blank_frames(make_pose):
    pose = make_pose(app_dim=36, mot_dim=36, bias=0.5)
    blank = replace(
        pose,
        root=PartModel.zeros(0, pose.root.window, pose.num_bins, 36, 36),
        children=tuple(PartModel.zeros(c.part_id, c.window, pose.num_bins, 36, 36, c.offset) for c in pose.children),
    )
    sample = VideoSample('blank', 'walk', frame_arrays=tuple(np.zeros((64, 64)) for _ in range(3)))
    cache = FeatureCache(FeatureConfig(num_scales=1, flow_iterations=2, flow_levels=1))
    config = InferenceConfig(detection_threshold=-50.0, frame_stride=2, max_detections_per_frame=3)

    result = detect_poses(sample, blank, cache, config)
    assert sorted(result.frames) == [0, 2]
    assert len(cache) == 2
    for frame in result.frames.values():
        assert 1 <= len(frame.detections) <= 3
        assert all(-50.0 < d.score <= 0.5 + 1e-9 for d in frame.detections)
        assert all(d.pose_id == 'pose' for d in frame.detections)


# ==================== 检测 ====================

def test_level_scores_equal_exhaustive_pose_score(make_pose):
    pose = make_pose(bias=-0.2)
    stacked = np.random.default_rng(7).normal(size=(6, 7, 12))
    level = score_level(stacked, pose, method='exact')
    for y, x in [(1, 1), (3, 4), (5, 6)]:
        best = pose_score((x, y), stacked, pose)
        assert level.scores[y, x] == pytest.approx(best.score)
        assert int(level.bins[y, x]) == best.view_bin
        assert level.locations(best.view_bin, x, y) == best.locations
    # 根部件窗口放不下的位置
    assert level.scores[0, 0] == FILL_SCORE


@pytest.mark.parametrize('method', ['diagonal', 'exact'])
@pytest.mark.parametrize('share_views', [True, False])
def test_per_bin_scores_equal_exhaustive_view_scores(make_pose, method, share_views):
    pose = make_pose(num_bins=10, app_dim=1, mot_dim=1, offsets=((0.8, 1.2, -0.4),), share_views=share_views)
    stacked = np.random.default_rng(13).normal(size=(7, 7, 2))
    level = score_level(stacked, pose, method=method)
    assert level.per_bin.shape == (10, 7, 7)
    children = list(np.ndindex(7, 7))
    for m, theta in enumerate(pose.view_centers):
        for y, x in np.ndindex(7, 7):
            try:
                extract_patch(stacked, (x, y), pose.root.window)
            except SizeError:
                assert level.per_bin[m, y, x] == FILL_SCORE
                continue
            best = max(view_score([(x, y), (cx, cy)], stacked, pose, theta) for cy, cx in children)
            assert level.per_bin[m, y, x] == pytest.approx(best, abs=1e-9)


def test_score_level_skips_too_small_grid(make_pose):
    assert score_level(np.zeros((1, 5, 12)), make_pose()) is None


def _detection(score, box, view_bin=0, level=0):
    return Detection('p', 0, (0, 0), level, 1.0, view_bin, 0.0, ((0, 0),), score, box)


def test_non_maximum_suppression():
    a = _detection(3.0, (0, 0, 10, 10))
    b = _detection(2.0, (1, 1, 11, 11))
    c = _detection(1.0, (20, 20, 30, 30))
    assert non_maximum_suppression([c, b, a], overlap=0.5) == [a, c]
    assert non_maximum_suppression([c, b, a], overlap=0.5, limit=1) == [a]
    assert non_maximum_suppression([c, b, a], overlap=1.0) == [a, b, c]


def test_view_estimation():
    detections = [_detection(1.0, (0, 0, 1, 1), 2), _detection(1.0, (0, 0, 1, 1), 1), _detection(0.5, (0, 0, 1, 1), 0)]
    assert estimate_view(detections) == 1
    with pytest.raises(EmptyInputError):
        estimate_view([])
    assert majority_view([3, 1, 3, 1]) == 1
    assert majority_view([2, 2, 0]) == 2
    assert majority_view([]) is None


# ==================== 金字塔 ====================

def test_pyramid_layout():
    maps = [np.full((4, 4), float(t)) for t in range(8)]
    pyramid = pyramid_pool(maps)
    assert pyramid.shape == (PYRAMID_DIM,)
    assert pyramid[0] == 7.0
    # 第二层: 前半段时间的单元取 3，后半段取 7
    np.testing.assert_array_equal(pyramid[1:9], [3, 3, 3, 3, 7, 7, 7, 7])
    np.testing.assert_array_equal(pyramid[9:25], [1] * 16)


def test_pyramid_short_video_and_invalid_cells():
    single = pyramid_pool([np.arange(4.0).reshape(2, 2)])
    assert single.shape == (PYRAMID_DIM,) and single[0] == 3.0

    with_fill = np.full((4, 4), FILL_SCORE)
    with_fill[0, 0] = 2.0
    pooled = pyramid_pool([with_fill] * 4)
    assert pooled.max() == 2.0 and pooled.min() == 2.0

    np.testing.assert_array_equal(pyramid_pool([np.full((3, 3), FILL_SCORE)] * 4), np.zeros(PYRAMID_DIM))
    with pytest.raises(EmptyInputError):
        pyramid_pool([])


def test_pyramid_parent_cell_dominates_children():
    rng = np.random.default_rng(5)
    for _ in range(100):
        frames, height, width = rng.integers(1, 12), rng.integers(1, 9), rng.integers(1, 9)
        volume = rng.normal(size=(frames, height, width))
        volume[rng.uniform(size=volume.shape) < 0.2] = FILL_SCORE
        pyramid = pyramid_pool(list(volume))
        assert pyramid.shape == (PYRAMID_DIM,)
        middle = pyramid[1:9].reshape(2, 2, 2)
        fine = pyramid[9:].reshape(4, 4, 4)
        assert np.all(middle <= pyramid[0])
        assert pyramid[0] == middle.max()
        for t, y, x in np.ndindex(2, 2, 2):
            children = fine[2 * t:2 * t + 2, 2 * y:2 * y + 2, 2 * x:2 * x + 2]
            assert np.all(children <= middle[t, y, x])
            assert middle[t, y, x] == children.max()


def test_standardize_and_collapse():
    scores = np.array([[FILL_SCORE, 3.0], [5.0, 1.0]])
    out = standardize(scores, mean=1.0, std=2.0)
    assert out[0, 0] == FILL_SCORE
    np.testing.assert_allclose(out[1], [2.0, 0.0])

    fine = np.arange(16.0).reshape(4, 4)
    coarse = np.full((2, 2), 100.0)
    collapsed = collapse_scales(ResponseMap(levels=(fine, coarse), scales=(1.0, 0.5), cell_size=8), (4, 4))
    assert collapsed.shape == (4, 4)
    assert collapsed.max() == 100.0
    assert collapsed[0, 0] == 0.0

    with pytest.raises(ValueError):
        ResponseMap(levels=(fine,), scales=(1.0, 0.5), cell_size=8)


def test_decide_breaks_ties_by_label():
    assert decide({'walk': 1.0, 'jump': 1.0, 'sit': 0.5}) == 'jump'
    assert decide({'walk': 2.0, 'jump': 1.0}) == 'walk'


# ==================== 分类 ====================

def test_classify_scores_every_action(make_pose, tiny_dataset):
    features = FeatureConfig(num_scales=2, flow_iterations=5, flow_levels=1)
    poses = {
        pose_id: round_templates(make_pose(pose_id, label, app_dim=36, mot_dim=36, seed=i))
        for i, (pose_id, label) in enumerate([('a0', tiny_dataset.vocabulary[0]), ('b0', tiny_dataset.vocabulary[1])])
    }
    rng = np.random.default_rng(0)
    num_lowres = features.histogram_bins + 2
    actions = {
        label: ActionModel(label, tuple(poses), num_lowres, rng.normal(size=PYRAMID_DIM * (2 + num_lowres)))
        for label in tiny_dataset.vocabulary
    }
    archive = ModelArchive(
        vocabulary=tiny_dataset.vocabulary,
        feature_config=features,
        model_config=ModelConfig(num_view_bins=4),
        parts=DEFAULT_PARTS,
        poses=poses,
        actions=actions,
    )

    sample = tiny_dataset.samples[0]
    cache = FeatureCache(features)
    result = classify(sample, archive, cache, InferenceConfig(frame_stride=2))
    assert result.sample_id == sample.sample_id
    assert set(result.scores) == set(tiny_dataset.vocabulary)
    assert result.label == decide(result.scores)
    assert result.view_bin is None or 0 <= result.view_bin < 4
    assert len(cache) == 3
