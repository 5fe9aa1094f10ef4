"""
核心模块测试: 骨架归一化、数据读取、划分协议与配置
"""

import json

import numpy as np
import pytest

from src.cli.synth import write_corpus
from src.core import (
    DEFAULT_PARTS,
    NUM_JOINTS,
    ROOT_PART_ID,
    ConfigurationError,
    Dataset,
    DegenerateSkeletonError,
    EmptyInputError,
    IngestionError,
    JointIndex,
    NumericError,
    Skeleton3D,
    SizeError,
    SkeletonParseError,
    UsageError,
    VideoSample,
    load_dataset,
    normalize_sequence,
    normalize_skeleton,
    sequence_from_positions,
    setup_config,
    split_dataset,
)
from src.core.skeleton import yaw_matrix


# ==================== 数据模型 ====================

def test_part_table_has_root_and_nine_parts():
    assert len(JointIndex) == NUM_JOINTS == 21
    assert len(DEFAULT_PARTS) == 9
    assert DEFAULT_PARTS[0].part_id == ROOT_PART_ID
    for part in DEFAULT_PARTS:
        assert part.anchor in part.joints


def test_skeleton_rejects_wrong_joint_count():
    with pytest.raises(SizeError):
        Skeleton3D(positions=np.zeros((20, 3)), motions=np.zeros((20, 3)), visible=np.ones(20))


def test_sequence_motion_is_frame_difference():
    rng = np.random.default_rng(1)
    positions = rng.normal(size=(4, NUM_JOINTS, 3))
    frames = sequence_from_positions(positions)
    np.testing.assert_allclose(frames[0].motions, 0.0)
    np.testing.assert_allclose(frames[2].motions, positions[2] - positions[1])
    assert [f.timestamp for f in frames] == [0, 1, 2, 3]


def test_dataset_rejects_action_outside_vocabulary():
    with pytest.raises(IngestionError):
        Dataset(samples=(VideoSample('a', 'jump'),), vocabulary=('walk',))


# ==================== 骨架归一化 ====================

@pytest.mark.parametrize('theta', [0.0, 0.7, np.pi / 2, 3.5, 5.9])
def test_normalization_removes_translation_rotation_and_scale(standing_joints, theta):
    moved = standing_joints @ yaw_matrix(theta).T * 2.3 + np.array([1.0, -4.0, 7.0])
    sequence = normalize_sequence(sequence_from_positions(moved[None]))

    expected = standing_joints - standing_joints[JointIndex.HIP_CENTER]
    np.testing.assert_allclose(sequence.skeletons[0].positions, expected, atol=1e-9)
    assert sequence.view_angle == pytest.approx(theta, abs=1e-9)


def test_normalized_torso_has_unit_length(standing_joints):
    skeleton = normalize_skeleton(sequence_from_positions(standing_joints[None] * 0.4)[0])
    torso = skeleton.positions[JointIndex.NECK] - skeleton.positions[JointIndex.HIP_CENTER]
    assert np.linalg.norm(torso) == pytest.approx(1.0)
    np.testing.assert_allclose(skeleton.positions[JointIndex.HIP_CENTER], 0.0, atol=1e-12)


def test_orientation_comes_from_first_frame_only(standing_joints):
    turned = standing_joints @ yaw_matrix(np.pi / 2).T
    sequence = normalize_sequence(sequence_from_positions(np.stack([standing_joints, turned])))
    assert sequence.view_angle == pytest.approx(0.0)
    # 第二帧的转身被保留
    shoulders = sequence.skeletons[1].positions[[JointIndex.L_SHOULDER, JointIndex.R_SHOULDER]]
    axis = shoulders[1] - shoulders[0]
    assert abs(axis[0]) < 1e-9
    assert abs(axis[2]) > 0.5


def test_degenerate_skeletons_are_rejected(standing_joints):
    with pytest.raises(DegenerateSkeletonError):
        normalize_skeleton(sequence_from_positions(np.zeros((1, NUM_JOINTS, 3)))[0])

    visible = np.ones((1, NUM_JOINTS), dtype=bool)
    visible[0, JointIndex.NECK] = False
    with pytest.raises(DegenerateSkeletonError):
        normalize_skeleton(sequence_from_positions(standing_joints[None], visible)[0])

    with pytest.raises(EmptyInputError):
        normalize_sequence([])


# ==================== 划分协议 ====================

def _grid_dataset():
    samples = tuple(
        VideoSample(f"{a}_{s}_{c}", a, subject=s, camera=c)
        for a in ('jump', 'walk') for s in ('s1', 's2', 's3') for c in ('c1', 'c2')
    )
    return Dataset(samples=samples, vocabulary=('jump', 'walk'))


def test_cross_view_holds_out_last_camera_by_default():
    train, test = split_dataset(_grid_dataset(), 'cross-view')
    assert {s.camera for s in test} == {'c2'}
    assert {s.camera for s in train} == {'c1'}
    assert len(train) + len(test) == 12


def test_cross_subject_with_explicit_holdout():
    train, test = split_dataset(_grid_dataset(), 'cross-subject', ['s1', 's2'])
    assert {s.subject for s in test} == {'s1', 's2'}
    assert {s.subject for s in train} == {'s3'}
    assert train.protocol == 'cross-subject'


def test_split_configuration_errors():
    dataset = _grid_dataset()
    with pytest.raises(ConfigurationError):
        split_dataset(dataset, 'cross-banana')
    with pytest.raises(ConfigurationError):
        split_dataset(dataset, 'cross-view', ['c9'])
    with pytest.raises(ConfigurationError):
        split_dataset(dataset, 'cross-environment')

    missing = Dataset(samples=(VideoSample('x', 'walk'),), vocabulary=('walk',))
    with pytest.raises(ConfigurationError):
        split_dataset(missing, 'cross-subject')


def test_cross_environment_uses_second_dataset():
    dataset = _grid_dataset()
    other = Dataset(samples=(VideoSample('e', 'walk', subject='s9', camera='c9'),), vocabulary=('jump', 'walk'))
    train, test = split_dataset(dataset, 'cross-environment', test_dataset=other)
    assert len(train) == len(dataset)
    assert [s.sample_id for s in test] == ['e']


# ==================== 数据读取 ====================

@pytest.fixture
def corpus(tmp_path, tiny_synth):
    return write_corpus(tmp_path / 'corpus', tiny_synth.model_copy(update={'frames': 3}), seed=0)


def test_load_dataset_reads_everything_written(corpus, tiny_synth):
    dataset = load_dataset(str(corpus))
    assert len(dataset) == 2 * 2 * 2
    assert dataset.vocabulary == tuple(sorted(dataset.vocabulary))

    sample = dataset.samples[0]
    assert sample.num_frames == 3
    assert sample.frame(0).shape == (tiny_synth.height, tiny_synth.width)
    assert len(sample.skeletons) == 3 and len(sample.boxes) == 3
    assert sample.joints2d.shape == (3, NUM_JOINTS, 2)


def test_missing_frames_directory_reports_path(corpus):
    record = json.loads(corpus.read_text().splitlines()[0])
    record['frames_dir'] = 'frames/does_not_exist'
    bad = corpus.parent / 'bad.jsonl'
    bad.write_text(json.dumps(record) + '\n')
    with pytest.raises(IngestionError, match='does_not_exist'):
        load_dataset(str(bad))


def test_malformed_skeleton_reports_line(corpus):
    record = json.loads(corpus.read_text().splitlines()[0])
    path = corpus.parent / record['skeleton_file']
    lines = path.read_text().splitlines()
    lines[1] = ' '.join(lines[1].split()[:-1])
    path.write_text('\n'.join(lines) + '\n')
    with pytest.raises(SkeletonParseError) as info:
        load_dataset(str(corpus))
    assert info.value.line_number == 2
    assert str(path) in info.value.message


def test_duplicate_manifest_ids_are_rejected(corpus):
    first = corpus.read_text().splitlines()[0]
    corpus.write_text(first + '\n' + first + '\n')
    with pytest.raises(IngestionError, match='重复'):
        load_dataset(str(corpus))


# ==================== 配置 ====================

def test_config_layers_and_overrides(tmp_path):
    config_file = tmp_path / 'run.conf'
    config_file.write_text('# 注释\nfeatures.cell_size = 6\nmodel.num_view_bins = 8\n')
    run = setup_config(
        str(config_file),
        overrides=['model.num_view_bins=12', 'protocol.holdout=["c1"]'],
        seed=7,
        use_dotenv=False,
        use_env=False,
    ).run_config
    assert run.features.cell_size == 6
    assert run.model.num_view_bins == 12
    assert run.protocol.holdout == ['c1']
    assert run.runtime.seed == 7


def test_environment_variables_are_read(monkeypatch):
    monkeypatch.setenv('MSTAOG_TRAINING__C', '0.5')
    monkeypatch.setenv('MSTAOG_TRAINING__ACTION_C', '2.5')
    monkeypatch.setenv('MSTAOG_FEATURES__CELL_SIZE', '6')
    run = setup_config(use_dotenv=False).run_config
    assert run.training.C == 0.5
    assert run.training.action_C == 2.5
    assert run.features.cell_size == 6


def test_dotenv_keys_match_mixed_case_fields(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / '.env').write_text('MSTAOG_TRAINING__ACTION_C=3.0\nMSTAOG_MODEL__NUM_VIEW_BINS=6\n')
    run = setup_config(use_env=False).run_config
    assert run.training.action_C == 3.0
    assert run.model.num_view_bins == 6


@pytest.mark.parametrize('override, key', [
    ('features.cell_size=1', 'features.cell_size'),
    ('mining.no_such_key=3', 'mining.no_such_key'),
    ('inference.dt_method=approximate', 'inference.dt_method'),
])
def test_invalid_configuration_names_the_key(override, key):
    with pytest.raises(ConfigurationError, match=key.replace('.', r'\.')):
        setup_config(overrides=[override], use_dotenv=False, use_env=False)


def test_cross_environment_requires_test_manifest():
    with pytest.raises(ConfigurationError):
        setup_config(overrides=['protocol.name=cross-environment'], use_dotenv=False, use_env=False)


def test_exit_codes():
    assert UsageError('x').exit_code == ConfigurationError('x').exit_code == 1
    assert IngestionError('x').exit_code == SizeError('x').exit_code == 2
    assert NumericError('x').exit_code == 3
