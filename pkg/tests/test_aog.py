"""
AND-OR 图测试: 视角插值、部件 / 视角 / 姿态 / 动作得分与模型归档
"""

import json

import numpy as np
import pytest

from src.aog import (
    PYRAMID_DIM,
    ActionModel,
    ModelArchive,
    PartModel,
    PoseModel,
    action_score,
    angular_distance,
    extract_patch,
    interp_weight,
    interp_weights,
    load_archive,
    part_appearance_score,
    part_score,
    pose_score,
    round_action,
    round_templates,
    save_archive,
    to_float32,
    view_bin_centers,
    view_score,
    window_anchor,
    window_patches,
)
from src.core import DEFAULT_PARTS, IngestionError, SizeError
from src.schemas.config_schemas import FeatureConfig, ModelConfig


# ==================== 视角插值 ====================

def test_view_bin_centers_and_wrapped_distance():
    np.testing.assert_allclose(view_bin_centers(4), [0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    assert float(angular_distance(0.1, 2 * np.pi - 0.1)) == pytest.approx(0.2)
    assert float(angular_distance(np.pi, 0.0)) == pytest.approx(np.pi)


def test_interp_weights_peak_at_nearest_bin():
    centers = view_bin_centers(6)
    weights = interp_weights(0.1, centers)
    assert weights.sum() == pytest.approx(1.0)
    assert int(np.argmax(weights)) == 0
    # 回绕: 接近 2pi 的视角与 bin 0 最近
    assert int(np.argmax(interp_weights(2 * np.pi - 0.05, centers))) == 0


def test_interp_weight_uses_wrapped_distance():
    assert interp_weight(0.7, 0.7) == pytest.approx(1.0)
    assert interp_weight(np.pi, 0.0) == pytest.approx(np.exp(-np.pi ** 2))
    assert interp_weight(0.1, 2 * np.pi - 0.1) == pytest.approx(np.exp(-0.04))


def test_appearance_score_is_convex_combination():
    part = PartModel(
        part_id=3,
        window=(1, 1),
        app_templates=np.array([[[[3.0, 0.0]]], [[[1.0, 0.0]]]]),
        mot_templates=np.zeros((2, 1, 1, 1)),
    )
    feat = np.array([[[1.0, 0.0]]])
    far = np.exp(-np.pi ** 2 / 4)
    score = part_appearance_score(feat, part, 0.0, view_centers=[0.0, np.pi / 2])
    assert score == pytest.approx((3.0 + far) / (1.0 + far))
    # 两个 bin 中点处取平均
    assert part_appearance_score(feat, part, np.pi / 4, view_centers=[0.0, np.pi / 2]) == pytest.approx(2.0)
    with pytest.raises(SizeError):
        part_appearance_score(np.zeros((1, 1, 3)), part, 0.0, view_centers=[0.0, np.pi / 2])


def test_unshared_views_use_nearest_template(make_pose):
    pose = make_pose(share_views=False)
    np.testing.assert_array_equal(pose.view_weights(np.pi / 2 + 0.2), [0, 1, 0, 0])
    assert pose.nearest_bin(np.pi / 4 - 0.1) == 0
    assert pose.nearest_bin(2 * np.pi - 0.1) == 0


def test_part_score_is_weighted_template_response(make_pose):
    pose = make_pose()
    part = pose.root
    rng = np.random.default_rng(5)
    app = rng.normal(size=(2, 2, 8))
    mot = rng.normal(size=(2, 2, 4))
    theta = 0.6
    weights = interp_weights(theta, pose.view_centers)
    expected = sum(
        weights[m] * (np.sum(part.app_templates[m] * app) + np.sum(part.mot_templates[m] * mot))
        for m in range(pose.num_bins)
    )
    assert part_score(app, mot, part, theta, pose.view_centers) == pytest.approx(expected)

    with pytest.raises(SizeError):
        part_score(app[:1], mot, part, theta, pose.view_centers)


# ==================== 窗口 ====================

def test_window_anchor_and_patch_bounds():
    assert window_anchor((3, 3)) == (1, 1)
    assert window_anchor((2, 4)) == (2, 1)
    grid = np.arange(5 * 6 * 2, dtype=float).reshape(5, 6, 2)
    np.testing.assert_array_equal(extract_patch(grid, (1, 1), (3, 3)), grid[0:3, 0:3])
    with pytest.raises(SizeError):
        extract_patch(grid, (0, 0), (3, 3))


def test_window_patches_match_template_layout():
    grid = np.random.default_rng(0).normal(size=(5, 6, 3))
    patches = window_patches(grid, (2, 3))
    assert patches.shape == (4, 4, 18)
    np.testing.assert_allclose(patches[2, 1], grid[2:4, 1:4].ravel())


# ==================== 视角 / 姿态得分 ====================

def test_pose_score_matches_view_score_at_argmax(make_pose):
    pose = make_pose(bias=0.3)
    stacked = np.random.default_rng(1).normal(size=(7, 8, 12))
    best = pose_score((3, 3), stacked, pose)
    assert best.locations[0] == (3, 3)
    assert view_score(best.locations, stacked, pose, best.theta) == pytest.approx(best.score)


def test_pose_score_dominates_every_configuration(make_pose):
    pose = make_pose()
    stacked = np.random.default_rng(2).normal(size=(6, 6, 12))
    best = pose_score((2, 2), stacked, pose)
    rng = np.random.default_rng(3)
    for _ in range(20):
        locations = [(2, 2)] + [tuple(rng.integers(0, 6, size=2)) for _ in pose.children]
        for theta in pose.view_centers:
            assert view_score(locations, stacked, pose, theta) <= best.score + 1e-9


def test_pose_model_validation(make_pose):
    pose = make_pose()
    with pytest.raises(SizeError):
        PoseModel(
            pose_id='bad', label='walk', root=pose.root, children=pose.children,
            view_centers=[0.0, 0.0, 1.0, 2.0], model_scale=1.0,
        )
    orphan = PartModel.zeros(5, (1, 1), 4, 8, 4)
    with pytest.raises(SizeError):
        PoseModel(
            pose_id='bad', label='walk', root=pose.root, children=(orphan,),
            view_centers=view_bin_centers(4), model_scale=1.0,
        )
    with pytest.raises(SizeError):
        PartModel(0, (2, 2), np.zeros((4, 2, 3, 8)), np.zeros((4, 2, 3, 4)))


# ==================== 动作得分 ====================

def test_action_score_is_linear():
    rng = np.random.default_rng(4)
    weights = rng.normal(size=PYRAMID_DIM * 3)
    action = ActionModel('walk', ('a', 'b'), num_lowres=1, weights=weights, bias=-0.5)
    pyramids = [rng.normal(size=PYRAMID_DIM) for _ in range(3)]
    expected = weights @ np.concatenate(pyramids) - 0.5
    assert action_score(pyramids[:2], pyramids[2:], action) == pytest.approx(expected)

    with pytest.raises(SizeError):
        action_score(pyramids[:1], pyramids[2:], action)
    with pytest.raises(SizeError):
        action_score([p[:10] for p in pyramids[:2]], pyramids[2:], action)
    with pytest.raises(SizeError):
        ActionModel('walk', ('a',), num_lowres=0, weights=np.zeros(10))


# ==================== 模型归档 ====================

@pytest.fixture
def archive(make_pose):
    poses = {
        'walk_0': round_templates(make_pose('walk_0', 'walk', seed=1, items=('0:1', '3:2'))),
        'jump_0': round_templates(make_pose('jump_0', 'jump', seed=2, response_mean=0.5, response_std=2.0)),
    }
    rng = np.random.default_rng(9)
    actions = {
        label: ActionModel(label, tuple(poses), num_lowres=1, weights=rng.normal(size=PYRAMID_DIM * 3), bias=0.1)
        for label in ('jump', 'walk')
    }
    return ModelArchive(
        vocabulary=('jump', 'walk'),
        feature_config=FeatureConfig(hog_bins=2),
        model_config=ModelConfig(num_view_bins=4),
        parts=DEFAULT_PARTS,
        poses=poses,
        actions=actions,
    )


def test_archive_round_trip(tmp_path, archive):
    directory = save_archive(archive, tmp_path / 'model')
    loaded = load_archive(directory)

    assert loaded.vocabulary == archive.vocabulary
    assert loaded.pose_ids == archive.pose_ids
    assert loaded.parts == archive.parts
    for pose_id, pose in archive.poses.items():
        other = loaded.poses[pose_id]
        assert other.items == pose.items
        assert other.response_std == pose.response_std
        for a, b in zip(pose.parts, other.parts):
            np.testing.assert_array_equal(a.app_templates, b.app_templates)
            np.testing.assert_array_equal(a.mot_templates, b.mot_templates)
        for a, b in zip(pose.children, other.children):
            np.testing.assert_allclose(a.offset.mean, b.offset.mean)
    for label, action in archive.actions.items():
        np.testing.assert_array_equal(loaded.actions[label].weights, to_float32(action.weights))


def test_rounded_actions_survive_reload_unchanged(tmp_path, archive):
    rounded = {label: round_action(action) for label, action in archive.actions.items()}
    for label, action in archive.actions.items():
        assert rounded[label].label == action.label
        assert rounded[label].bias == action.bias
        np.testing.assert_array_equal(rounded[label].weights, to_float32(action.weights))
        assert not np.array_equal(rounded[label].weights, action.weights)

    source = ModelArchive(
        vocabulary=archive.vocabulary,
        feature_config=archive.feature_config,
        model_config=archive.model_config,
        parts=archive.parts,
        poses=archive.poses,
        actions=rounded,
    )
    loaded = load_archive(save_archive(source, tmp_path / 'model'))
    for label, action in rounded.items():
        np.testing.assert_array_equal(loaded.actions[label].weights, action.weights)


def test_archive_is_byte_stable(tmp_path, archive):
    first = save_archive(archive, tmp_path / 'a')
    second = save_archive(load_archive(first), tmp_path / 'b')
    for name in ('index.json', 'weights.bin'):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_archive_rejects_missing_or_foreign_files(tmp_path, archive):
    with pytest.raises(IngestionError):
        load_archive(tmp_path / 'nowhere')

    directory = save_archive(archive, tmp_path / 'model')
    index = json.loads((directory / 'index.json').read_text())
    index['format_version'] = 999
    (directory / 'index.json').write_text(json.dumps(index))
    with pytest.raises(IngestionError, match='版本'):
        load_archive(directory)


def test_archive_rejects_dangling_pose_reference(archive):
    bad = ActionModel('walk', ('missing',), num_lowres=0, weights=np.zeros(PYRAMID_DIM))
    with pytest.raises(SizeError):
        ModelArchive(
            vocabulary=archive.vocabulary,
            feature_config=archive.feature_config,
            model_config=archive.model_config,
            parts=archive.parts,
            poses=archive.poses,
            actions={'walk': bad},
        )
