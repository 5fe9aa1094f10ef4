"""
几何测试: 缩放正交投影拟合、偏移高斯投影与形变得分
"""

import numpy as np
import pytest

from src.core import EmptyInputError, NumericError, SizeError, sequence_from_positions
from src.core.errors import UnderdeterminedError
from src.geometry import (
    TWO_PI,
    OffsetGaussian2D,
    OffsetGaussian3D,
    ProjectionParams,
    deformation_score,
    estimate_offsets,
    fit_projection,
    fit_view_angle,
    floor_eigenvalues,
    part_offsets,
    project_offset,
    projection_matrix,
    rotation_projection,
    wrap_angle,
)


@pytest.fixture
def cloud():
    return np.random.default_rng(3).normal(size=(30, 3))


def test_wrap_angle_range():
    assert wrap_angle(-0.1) == pytest.approx(TWO_PI - 0.1)
    assert wrap_angle(TWO_PI) == 0.0
    assert 0.0 <= wrap_angle(123.4) < TWO_PI


def test_projection_matrix_layout():
    q = rotation_projection(np.pi / 2, 2.0, 3.0)
    np.testing.assert_allclose(q, [[0.0, 0.0, -2.0], [0.0, 3.0, 0.0]], atol=1e-12)
    params = ProjectionParams(k1=2.0, k2=3.0, theta=np.pi / 2)
    np.testing.assert_allclose(projection_matrix(params), q)


def test_projection_params_reject_non_positive_scale():
    with pytest.raises(ValueError):
        ProjectionParams(k1=0.0, k2=1.0, theta=0.0)


@pytest.mark.parametrize('theta', [0.0, 0.4, 2.0, np.pi, 4.2, 6.1])
def test_fit_view_angle_recovers_exact_projection(cloud, theta):
    points2d = cloud @ rotation_projection(theta, 25.0, 23.0).T
    params = fit_view_angle(cloud, points2d)
    assert params.theta == pytest.approx(wrap_angle(theta), abs=1e-9)
    assert params.k1 == pytest.approx(25.0)
    assert params.k2 == pytest.approx(23.0)
    assert params.residual == pytest.approx(0.0, abs=1e-9)


def test_fit_projection_with_known_angle(cloud):
    noisy = cloud @ rotation_projection(1.0, 10.0, 12.0).T
    noisy = noisy + np.random.default_rng(0).normal(scale=0.01, size=noisy.shape)
    params = fit_projection(cloud, noisy, 1.0)
    assert params.k1 == pytest.approx(10.0, rel=1e-2)
    assert params.k2 == pytest.approx(12.0, rel=1e-2)
    assert 0 < params.residual < 0.05


def test_fit_projection_failures(cloud):
    with pytest.raises(SizeError):
        fit_projection(cloud, np.zeros((29, 2)), 0.0)
    with pytest.raises(UnderdeterminedError):
        fit_projection(cloud[:1], np.zeros((1, 2)), 0.0)

    flat = cloud.copy()
    flat[:, 1] = 0.0
    with pytest.raises(UnderdeterminedError):
        fit_projection(flat, flat[:, :2], 0.0)

    # 所有点沿视线方向共线时无法估计视角
    line = np.zeros((5, 3))
    line[:, 2] = np.arange(5)
    line[:, 1] = np.arange(5)
    with pytest.raises(UnderdeterminedError):
        fit_view_angle(line, np.zeros((5, 2)))


def test_project_offset_isotropic():
    gaussian = OffsetGaussian3D.isotropic([0.2, -0.5, 0.3], sigma=0.5)
    projected = project_offset(gaussian, ProjectionParams(k1=4.0, k2=2.0, theta=0.3))
    q = rotation_projection(0.3, 4.0, 2.0)
    np.testing.assert_allclose(projected.mean, q @ gaussian.mean)
    np.testing.assert_allclose(projected.cov, np.diag([4.0, 1.0]), atol=1e-12)


@pytest.mark.parametrize('seed', range(20))
def test_project_offset_matches_sampled_covariance(seed):
    rng = np.random.default_rng(100 + seed)
    gaussian = OffsetGaussian3D(mean=rng.normal(size=3), cov=rng.uniform(0.05, 2.0, size=3))
    params = ProjectionParams(k1=rng.uniform(0.5, 5.0), k2=rng.uniform(0.5, 5.0), theta=rng.uniform(0.0, TWO_PI))
    projected = project_offset(gaussian, params)

    draws = gaussian.mean + rng.normal(size=(1_000_000, 3)) * np.sqrt(gaussian.variances)
    points = draws @ projection_matrix(params).T
    sampled = np.cov(points, rowvar=False)
    error = np.linalg.norm(sampled - projected.cov) / np.linalg.norm(projected.cov)
    assert error < 0.02
    np.testing.assert_allclose(points.mean(axis=0), projected.mean, atol=0.02 * np.sqrt(projected.cov.diagonal().max()))


def test_project_offset_floors_degenerate_covariance():
    # 竖直方向方差为 1e-12 的 3D 高斯投影后协方差被截断到 eigen_floor
    gaussian = OffsetGaussian3D(mean=np.zeros(3), cov=np.diag([1.0, 1e-12, 1.0]))
    projected = project_offset(gaussian, ProjectionParams(k1=1.0, k2=1.0, theta=0.0), eigen_floor=1e-4)
    assert np.linalg.eigvalsh(projected.cov).min() == pytest.approx(1e-4)


def test_offset_gaussian_3d_validation():
    with pytest.raises(NumericError):
        OffsetGaussian3D(mean=np.zeros(3), cov=np.ones((3, 3)))
    with pytest.raises(NumericError):
        OffsetGaussian3D(mean=np.zeros(3), cov=np.array([1.0, 0.0, 1.0]))
    gaussian = OffsetGaussian3D.from_precisions(np.zeros(3), horizontal=4.0, vertical=2.0)
    np.testing.assert_allclose(gaussian.variances, [0.25, 0.5, 0.25])


def test_deformation_score_is_negative_mahalanobis():
    gaussian = OffsetGaussian2D(mean=[1.0, 2.0], cov=np.diag([4.0, 1.0]))
    assert deformation_score([0, 0], [1, 2], gaussian) == 0.0
    assert deformation_score([0, 0], [3, 2], gaussian) == pytest.approx(-1.0)
    assert deformation_score([5, 5], [6, 8], gaussian) == pytest.approx(-1.0)


def test_deformation_score_rejects_indefinite_covariance():
    with pytest.raises(NumericError):
        deformation_score([0, 0], [1, 1], OffsetGaussian2D(mean=[0, 0], cov=[[1.0, 2.0], [2.0, 1.0]]))


def test_floor_eigenvalues_keeps_valid_matrix():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(floor_eigenvalues(cov), cov)
    floored = floor_eigenvalues(np.array([[1.0, 1.0], [1.0, 1.0]]), floor=0.1)
    assert np.linalg.eigvalsh(floored).min() == pytest.approx(0.1)


def test_estimate_offsets_from_skeletons(standing_joints):
    skeletons = sequence_from_positions(np.stack([standing_joints, standing_joints]))
    offsets = estimate_offsets(skeletons, sigma0=0.2)
    expected = part_offsets(skeletons[0])
    assert sorted(offsets) == list(range(9))
    np.testing.assert_allclose(offsets[0].mean, 0.0)
    np.testing.assert_allclose(offsets[3].mean, expected[3])
    np.testing.assert_allclose(offsets[3].variances, [0.04] * 3)

    with pytest.raises(EmptyInputError):
        estimate_offsets([])
