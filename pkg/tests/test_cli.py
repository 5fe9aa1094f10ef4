"""
命令行测试: 合成语料、评估报告、子命令退出码与端到端训练
"""

import json

import numpy as np
import pytest

from src.cli.evaluation import (
    ConfusionMatrix,
    accuracy_from_scores,
    check_vocabulary,
    evaluation_report,
    view_breakdown,
)
from src.cli.main import main
from src.cli.synth import image_center, pixel_scale, synthesize
from src.core import UsageError, normalize_sequence, sequence_from_positions
from src.core.output_formatter import OutputFormatter
from src.geometry import wrap_angle
from src.inference import Classification
from src.schemas.config_schemas import SynthConfig
from src.streaming import EventLog


# ==================== 合成语料 ====================

def test_synth_covers_every_action_subject_and_view():
    config = SynthConfig(classes=3, views=[0.0, 60.0, 120.0], subjects=4, frames=2)
    samples = synthesize(config, seed=1)
    assert len(samples) == 3 * 4 * 3
    assert len({s.sample_id for s in samples}) == len(samples)
    assert {s.camera for s in samples} == {'view000', 'view060', 'view120'}
    assert all(len(s.frames) == 2 and s.frames[0].shape == (96, 96) for s in samples)


def test_synth_projection_and_view_angle(tiny_rendered, tiny_synth):
    frontal = next(s for s in tiny_rendered if s.camera == 'view000')
    offset = frontal.joints2d - frontal.positions[:, :, :2] * pixel_scale(tiny_synth)
    np.testing.assert_allclose(offset, np.broadcast_to(offset[0, 0], offset.shape))
    assert np.all(np.abs(offset[0, 0] - image_center(tiny_synth)) <= [4.0, 2.0])
    for box, joints in zip(frontal.boxes, frontal.joints2d):
        assert box.x <= joints[:, 0].min() and joints[:, 0].max() <= box.x + box.w

    for sample in tiny_rendered:
        normalized = normalize_sequence(sequence_from_positions(sample.positions))
        assert abs(np.angle(np.exp(1j * (normalized.view_angle - wrap_angle(sample.view))))) < 1e-6


def test_synth_is_deterministic(tiny_synth):
    first = synthesize(tiny_synth, seed=3)
    second = synthesize(tiny_synth, seed=3)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.frames[-1], b.frames[-1])
        np.testing.assert_array_equal(a.joints2d, b.joints2d)


# ==================== 评估报告 ====================

def _results():
    return [
        Classification('a', 'jump', {'jump': 1.0, 'walk': 0.5}, 0),
        Classification('b', 'walk', {'jump': 0.2, 'walk': 0.9}, 1),
        Classification('c', 'walk', {'jump': 0.1, 'walk': 0.3}, None),
    ]


def test_confusion_matrix():
    matrix = ConfusionMatrix.from_predictions(['jump', 'jump', 'walk'], ['jump', 'walk', 'walk'], ('jump', 'sit', 'walk'))
    np.testing.assert_array_equal(matrix.counts, [[1, 0, 1], [0, 0, 0], [0, 0, 1]])
    assert matrix.accuracy == pytest.approx(2 / 3)
    per_class = matrix.per_class_accuracy()
    assert per_class['jump'] == 0.5 and np.isnan(per_class['sit'])
    with pytest.raises(UsageError):
        ConfusionMatrix.from_predictions(['run'], ['jump'], ('jump',))


def test_report_accuracy_matches_score_table(tmp_path):
    truth = ['jump', 'jump', 'walk']
    summary = evaluation_report(tmp_path, _results(), truth, ('jump', 'walk'), ['c1', 'c2', 'c2'])
    assert summary['accuracy'] == pytest.approx(2 / 3)
    assert accuracy_from_scores(tmp_path / 'scores.csv') == summary['accuracy']
    assert json.loads((tmp_path / 'summary.json').read_text())['num_videos'] == 3
    assert (tmp_path / 'confusion.csv').read_text().splitlines()[1] == 'jump,1,1'
    assert summary['per_camera'] == [
        {'camera': 'c1', 'num_videos': 1, 'accuracy': 1.0},
        {'camera': 'c2', 'num_videos': 2, 'accuracy': 0.5},
    ]


def test_view_breakdown_and_vocabulary_check():
    rows = view_breakdown(_results(), ['jump', 'walk', 'walk'], [None, 'c1', 'c1'])
    assert rows[0] == {'camera': '', 'num_videos': 1, 'accuracy': 1.0}
    check_vocabulary(('jump', 'walk'), ['walk'])
    with pytest.raises(UsageError):
        check_vocabulary(('jump', 'walk'), ['sit'])


def test_format_table():
    table = OutputFormatter.format_table(['label', 'score'], [['walk', 0.123456], ['jump', 2]])
    lines = table.splitlines()
    assert lines[0] == 'label  score'
    assert lines[1] == '-----  ------'
    assert lines[2] == 'walk   0.1235'
    assert lines[3] == 'jump   2'


# ==================== 子命令 ====================

def _common(tmp_path):
    return ['--quiet', '--set', f"runtime.workdir={tmp_path / 'runs'}"]


SMALL_CORPUS = [
    '--set', 'synth.classes=2',
    '--set', 'synth.subjects=1',
    '--set', 'synth.frames=2',
    '--set', 'synth.views=[0, 90]',
]


def test_synth_and_ingest_commands(tmp_path):
    corpus = tmp_path / 'corpus'
    assert main(['synth', '--out', str(corpus)] + SMALL_CORPUS + _common(tmp_path)) == 0
    manifest = corpus / 'manifest.jsonl'
    assert len(manifest.read_text().splitlines()) == 4

    index_path = tmp_path / 'index.json'
    assert main(['ingest', '--manifest', str(manifest), '--out', str(index_path)] + _common(tmp_path)) == 0
    index = json.loads(index_path.read_text())
    assert index['num_samples'] == 4
    assert index['cameras'] == ['view000', 'view090']

    events = EventLog.read(tmp_path / 'runs' / 'events.jsonl')
    assert [(e.stage, e.event['action']) for e in events] == [
        ('synth', 'started'), ('synth', 'completed'), ('ingest', 'started'), ('ingest', 'completed'),
    ]
    assert (tmp_path / 'runs' / 'runs.db').exists()


@pytest.mark.parametrize('argv', [['bogus'], ['ingest'], ['train', '--manifest']])
def test_usage_errors_exit_with_one(argv):
    assert main(argv) == 1


def test_invalid_override_exits_with_one(tmp_path):
    assert main(['synth', '--out', str(tmp_path), '--set', 'synth.classes=9'] + _common(tmp_path)) == 1


def test_missing_manifest_exits_with_two(tmp_path):
    assert main(['ingest', '--manifest', str(tmp_path / 'missing.jsonl')] + _common(tmp_path)) == 2


# ==================== 端到端 ====================

FAST = [
    '--set', 'synth.classes=2',
    '--set', 'synth.subjects=2',
    '--set', 'synth.frames=8',
    '--set', 'synth.views=[0, 90]',
    '--set', 'features.num_scales=2',
    '--set', 'features.flow_iterations=10',
    '--set', 'features.flow_levels=1',
    '--set', 'model.num_view_bins=4',
    '--set', 'mining.frame_stride=2',
    '--set', 'mining.max_examples_per_part=60',
    '--set', 'mining.cluster_floor=3',
    '--set', 'training.num_negatives=200',
    '--set', 'training.bootstrap_rounds=1',
    '--set', 'training.latent_iterations=2',
    '--set', 'training.epochs=3',
    '--set', 'training.negative_frames=8',
    '--set', 'training.action_epochs=100',
    '--set', 'registry.enabled=false',
    '--seed', '5',
]


@pytest.fixture
def e2e_corpus(tmp_path):
    corpus = tmp_path / 'corpus'
    assert main(['synth', '--out', str(corpus)] + FAST + _common(tmp_path)) == 0
    return corpus / 'manifest.jsonl'


@pytest.mark.slow
def test_train_then_evaluate(tmp_path, e2e_corpus):
    model = tmp_path / 'model'
    assert main(['train', '--manifest', str(e2e_corpus), '--out', str(model)] + FAST + _common(tmp_path)) == 0
    assert (model / 'index.json').exists() and (model / 'weights.bin').exists()

    report = tmp_path / 'eval'
    argv = ['eval', '--archive', str(model), '--manifest', str(e2e_corpus), '--out', str(report)]
    assert main(argv + FAST + _common(tmp_path)) == 0
    summary = json.loads((report / 'summary.json').read_text())
    assert summary['num_videos'] == 4
    assert 0.0 <= summary['accuracy'] <= 1.0
    assert accuracy_from_scores(report / 'scores.csv') == summary['accuracy']

    predictions = tmp_path / 'predictions.jsonl'
    argv = ['infer', '--archive', str(model), '--manifest', str(e2e_corpus), '--out', str(predictions)]
    assert main(argv + FAST + _common(tmp_path)) == 0
    assert len(predictions.read_text().splitlines()) == 8


@pytest.mark.slow
def test_training_is_reproducible(tmp_path, e2e_corpus):
    outputs = []
    for name, jobs in (('first', '1'), ('second', '3')):
        out = tmp_path / name
        argv = ['train', '--manifest', str(e2e_corpus), '--out', str(out), '--jobs', jobs]
        assert main(argv + FAST + _common(tmp_path)) == 0
        outputs.append(out)
    for name in ('index.json', 'weights.bin'):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


# ==================== 跨视角 ====================

CROSS_VIEW = [
    '--set', 'synth.classes=3',
    '--set', 'synth.subjects=6',
    '--set', 'synth.views=[0, 60, 120]',
    '--set', 'synth.frames=12',
    '--set', 'features.num_scales=2',
    '--set', 'features.flow_iterations=10',
    '--set', 'features.flow_levels=1',
    '--set', 'mining.frame_stride=2',
    '--set', 'mining.max_examples_per_part=120',
    '--set', 'training.num_negatives=400',
    '--set', 'training.bootstrap_rounds=1',
    '--set', 'training.latent_iterations=3',
    '--set', 'training.epochs=5',
    '--set', 'training.negative_frames=16',
    '--set', 'protocol.name=cross-view',
    '--set', 'protocol.holdout=["view120"]',
    '--set', 'registry.enabled=false',
    '--seed', '5',
]


@pytest.fixture
def cross_view_corpus(tmp_path):
    corpus = tmp_path / 'corpus'
    assert main(['synth', '--out', str(corpus)] + CROSS_VIEW + _common(tmp_path)) == 0
    return corpus / 'manifest.jsonl'


def _held_out_summary(tmp_path, manifest, name, extra=()):
    model, report = tmp_path / f"{name}-model", tmp_path / f"{name}-eval"
    options = CROSS_VIEW + list(extra) + _common(tmp_path)
    assert main(['train', '--manifest', str(manifest), '--out', str(model)] + options) == 0
    assert main(['eval', '--archive', str(model), '--manifest', str(manifest), '--out', str(report)] + options) == 0
    return json.loads((report / 'summary.json').read_text())


@pytest.mark.slow
def test_unseen_view_accuracy(tmp_path, cross_view_corpus):
    summary = _held_out_summary(tmp_path, cross_view_corpus, 'shared')
    assert summary['num_videos'] == 3 * 6
    assert [c['camera'] for c in summary['per_camera']] == ['view120']
    assert summary['accuracy'] >= 0.85


@pytest.mark.slow
def test_sharing_views_beats_independent_views(tmp_path, cross_view_corpus):
    shared = _held_out_summary(tmp_path, cross_view_corpus, 'shared')
    independent = _held_out_summary(tmp_path, cross_view_corpus, 'independent', ['--set', 'model.share_views=false'])
    assert shared['accuracy'] - independent['accuracy'] >= 0.10
