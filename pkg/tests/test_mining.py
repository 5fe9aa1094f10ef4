"""
姿态挖掘测试: 相似变换、部件距离、谱聚类、Apriori 搜索与剪枝
"""

from itertools import combinations
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.cli.synth import BodyPose, body_joints, raise_arms
from src.core import DEFAULT_PARTS, Dataset, EmptyInputError, SizeError, sequence_from_positions
from src.core.skeleton import yaw_matrix
from src.mining import (
    ActivationIndex,
    MiningCorpus,
    PartExample,
    PartItem,
    PoseCandidate,
    activation,
    build_corpus,
    cluster_parts,
    collect_part_examples,
    distance_matrix,
    eigengap_count,
    fit_similarity,
    greedy_cover,
    mine_class_poses,
    mine_poses,
    part_distance,
    pose_distance,
    pose_table_rows,
    prune_by_validation,
    prune_poses,
    remove_non_maximal,
    support_and_discrimination,
    symmetric_distance,
    validation_ap,
)
from src.schemas.config_schemas import MiningConfig


ARM = DEFAULT_PARTS[3]
LEG = DEFAULT_PARTS[4]


def _example(positions, motions=None, visible=None, part_id=2):
    positions = np.asarray(positions, dtype=np.float64)
    return PartExample(
        part_id=part_id,
        positions=positions,
        motions=np.zeros_like(positions) if motions is None else np.asarray(motions, dtype=np.float64),
        visible=np.ones(len(positions), dtype=bool) if visible is None else np.asarray(visible, dtype=bool),
    )


def _item(item_id, skeleton, part):
    example = PartExample.from_skeleton(skeleton, part)
    return PartItem(item_id, part.part_id, example.positions, example.motions, example.visible, members=1)


# ==================== 相似变换 ====================

@pytest.fixture
def joints():
    return np.random.default_rng(11).normal(size=(5, 3))


def test_vertical_similarity_recovers_yaw_scale_and_shift(joints):
    target = 1.7 * joints @ yaw_matrix(0.8).T + np.array([0.5, -1.0, 2.0])
    transform = fit_similarity(joints, target, 'vertical')
    assert transform.scale == pytest.approx(1.7)
    assert transform.angle == pytest.approx(0.8)
    np.testing.assert_allclose(transform.translation, [0.5, -1.0, 2.0], atol=1e-9)
    assert transform.residual == pytest.approx(0.0, abs=1e-12)
    assert not transform.degenerate


def test_full_similarity_recovers_arbitrary_rotation(joints):
    rotation = Rotation.from_euler('xyz', [0.3, -0.5, 1.1]).as_matrix()
    target = 0.6 * joints @ rotation.T
    transform = fit_similarity(joints, target, 'full')
    np.testing.assert_allclose(transform.rotation, rotation, atol=1e-9)
    assert transform.scale == pytest.approx(0.6)

    # 只允许绕竖直轴旋转时无法完全对齐
    assert fit_similarity(joints, target, 'vertical').residual > 1e-3


def test_collinear_joints_fall_back_to_translation():
    line = np.outer(np.arange(3.0), [1.0, 2.0, 0.0])
    transform = fit_similarity(line, line + 1.0)
    assert transform.degenerate
    assert transform.scale == 1.0
    np.testing.assert_allclose(transform.rotation, np.eye(3))
    np.testing.assert_allclose(transform.translation, [1.0, 1.0, 1.0])


def test_similarity_rejects_unknown_alignment(joints):
    with pytest.raises(ValueError):
        fit_similarity(joints, joints, 'affine')


# ==================== 部件距离 ====================

def test_part_distance_ignores_similarity_transforms(joints):
    rng = np.random.default_rng(12)
    motions = rng.normal(size=joints.shape) * 0.1
    s = _example(joints[:4], motions[:4])
    rotation = yaw_matrix(-1.3)
    r = _example(2.5 * joints[:4] @ rotation.T + 3.0, 2.5 * motions[:4] @ rotation.T)
    assert part_distance(s, r) == pytest.approx(0.0, abs=1e-9)
    assert part_distance(s, s) == pytest.approx(0.0, abs=1e-12)


def test_visibility_mismatch_scales_distance(joints):
    s = _example(joints[:4])
    r = _example(joints[:4] + np.random.default_rng(13).normal(size=(4, 3)) * 0.2)
    hidden = _example(r.positions, visible=np.zeros(4))
    base = part_distance(s, r)
    assert base > 0
    assert part_distance(s, hidden, penalty=1.0) == pytest.approx(2.0 * base)
    assert part_distance(s, hidden, penalty=0.5) == pytest.approx(1.5 * base)


def test_part_distance_requires_matching_parts(joints):
    with pytest.raises(SizeError):
        part_distance(_example(joints[:4]), _example(joints[:4], part_id=3))


def test_distance_matrix_is_symmetric(joints):
    rng = np.random.default_rng(14)
    examples = [_example(joints[:4] + rng.normal(size=(4, 3)) * 0.3) for _ in range(6)]
    matrix = distance_matrix(examples)
    np.testing.assert_allclose(matrix, matrix.T)
    np.testing.assert_array_equal(np.diag(matrix), 0.0)
    assert matrix[1, 4] == pytest.approx(symmetric_distance(examples[1], examples[4]))


# ==================== 谱聚类 ====================

STRAIGHT = np.array([[0.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.2, -1.9, 0.0], [0.3, -2.2, 0.1]])
BENT = np.array([[0.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.9, -1.1, 0.2], [1.2, -1.1, 0.3]])


def _arm_examples(counts, seed=0):
    rng = np.random.default_rng(seed)
    examples = []
    for shape, count in zip((STRAIGHT, BENT), counts):
        examples.extend(_example(shape + rng.normal(size=shape.shape) * 0.01) for _ in range(count))
    return examples


def test_eigengap_count():
    assert eigengap_count(np.array([0.0, 0.01, 0.9, 0.95]), max_clusters=8) == 2
    assert eigengap_count(np.array([0.0, 0.8, 0.85]), max_clusters=8) == 1
    assert eigengap_count(np.array([0.0, 0.0, 0.0, 0.9]), max_clusters=2) == 1
    assert eigengap_count(np.array([0.0]), max_clusters=8) == 1


def test_cluster_parts_separates_distinct_shapes():
    examples = _arm_examples((12, 5))
    items = cluster_parts(examples, MiningConfig(cluster_floor=3), seed=0)
    assert [item.members for item in items] == [12, 5]
    assert [item.item_id for item in items] == ['p2i0', 'p2i1']
    assert set(items[0].member_indices) == set(range(12))
    np.testing.assert_allclose(items[0].positions, STRAIGHT, atol=0.02)
    assert items[1].visible.all()


def test_cluster_parts_drops_small_clusters():
    items = cluster_parts(_arm_examples((12, 3)), MiningConfig(cluster_floor=4), seed=0)
    assert [item.members for item in items] == [12]


def test_cluster_parts_needs_two_examples():
    with pytest.raises(EmptyInputError):
        cluster_parts(_arm_examples((1, 0)))


# ==================== 激活值与挖掘 ====================

@pytest.fixture
def arm_corpus():
    """两类动作: 'raise' 举起双臂，'rest' 双臂下垂；腿部在两类中相同"""
    rest = sequence_from_positions(np.stack([body_joints(BodyPose())] * 2))
    raised = sequence_from_positions(np.stack([body_joints(raise_arms(0.5))] * 2))
    corpus = MiningCorpus(
        sample_ids=('r0', 'r1', 'u0', 'u1'),
        labels=('rest', 'rest', 'raise', 'raise'),
        vocabulary=('raise', 'rest'),
        sequences=(tuple(rest), tuple(rest), tuple(raised), tuple(raised)),
        frame_indices=((0, 1),) * 4,
    )
    items = {
        'up': _item('p3i0', raised[0], ARM),
        'down': _item('p3i1', rest[0], ARM),
        'leg': _item('p4i0', rest[0], LEG),
    }
    return corpus, items


def test_activation_takes_best_frame(arm_corpus):
    corpus, items = arm_corpus
    mixed = corpus.sequences[0][:1] + corpus.sequences[2][:1]
    assert activation([items['up']], mixed) == pytest.approx(1.0)
    assert activation([items['up']], corpus.sequences[0]) < 0.05
    with pytest.raises(EmptyInputError):
        activation([items['up']], ())


def test_support_and_discrimination():
    support, discrimination = support_and_discrimination(
        np.array([1.0, 0.5, 0.2, 0.2]), ['a', 'a', 'b', 'b'], ['a', 'b', 'c'],
    )
    assert support == pytest.approx({'a': 0.75, 'b': 0.2})
    assert discrimination['a'] == pytest.approx(3.75)
    assert discrimination['b'] == pytest.approx(0.2 / 0.75)
    assert 'c' not in support


def test_mining_keeps_maximal_discriminative_poses(arm_corpus):
    corpus, items = arm_corpus
    index = ActivationIndex(corpus, items.values())

    support, discrimination = index.evaluate(frozenset(['p4i0']))
    assert support == pytest.approx({'raise': 1.0, 'rest': 1.0})
    assert discrimination['raise'] == pytest.approx(1.0)

    mined = mine_class_poses(index, 'raise')
    assert [c.item_ids for c in mined] == [('p3i0', 'p4i0')]
    assert mined[0].pose_id == 'raise:p3i0+p4i0'
    assert mined[0].support['raise'] == pytest.approx(1.0)

    poses = mine_poses({3: [items['up'], items['down']], 4: [items['leg']]}, corpus)
    assert sorted(poses) == ['raise', 'rest']
    assert [c.item_ids for c in poses['rest']] == [('p3i1', 'p4i0')]

    rows = pose_table_rows(poses, corpus.vocabulary)
    assert len(rows) == 2
    assert rows[0]['items'] == 'p3i0 p4i0'
    assert rows[0]['supp_raise'] == pytest.approx(1.0)


def _distinct_part_subsets(items):
    for size in range(1, len(items) + 1):
        for combo in combinations(items, size):
            if len({i.part_id for i in combo}) == size:
                yield combo


def _threshold_between(values, quantile):
    """取两个相邻取值（间隔大于 1e-6）的中点作为阈值"""
    values = np.unique(np.asarray(values, dtype=np.float64))
    gaps = np.flatnonzero(np.diff(values) > 1e-6)
    k = gaps[int(quantile * (len(gaps) - 1))]
    return 0.5 * (values[k] + values[k + 1])


@pytest.mark.parametrize('quantile', [0.25, 0.5, 0.75])
def test_mine_poses_matches_exhaustive_enumeration(tiny_dataset, quantile):
    corpus = build_corpus(tiny_dataset)
    sources = [(0, 0), (3, 2), (6, 4)]
    items_by_part = {
        part.part_id: [
            _item(f"p{part.part_id}i{k}", corpus.sequences[v][t], part)
            for k, (v, t) in enumerate(sources)
        ]
        for part in DEFAULT_PARTS[2:5]
    }
    all_items = [item for group in items_by_part.values() for item in group]
    table = {}
    for combo in _distinct_part_subsets(all_items):
        activations = np.array([activation(combo, sequence) for sequence in corpus.sequences])
        table[frozenset(i.item_id for i in combo)] = support_and_discrimination(
            activations, corpus.labels, corpus.vocabulary,
        )
    assert len(table) == 63

    # 增加部件项不会提高任何类别的支持度
    for key, (support, _) in table.items():
        for item_id in key:
            smaller = key - {item_id}
            if smaller:
                for label, value in support.items():
                    assert value <= table[smaller][0][label] + 1e-9

    supports = [value for support, _ in table.values() for value in support.values()]
    ratios = [value for _, disc in table.values() for value in disc.values() if np.isfinite(value) and value > 0]
    config = MiningConfig(
        support_threshold=_threshold_between(supports, quantile),
        discrimination_threshold=_threshold_between(ratios, quantile),
    )
    mined = mine_poses(items_by_part, corpus, config=config)
    for label in corpus.vocabulary:
        passing = {
            key for key, (support, disc) in table.items()
            if support[label] >= config.support_threshold and disc[label] >= config.discrimination_threshold
        }
        expected = {key for key in passing if not any(key < other for other in passing)}
        assert {c.key for c in mined[label]} == expected
        scores = [c.score for c in mined[label]]
        assert scores == sorted(scores, reverse=True)


def test_mine_poses_requires_items(arm_corpus):
    corpus, _ = arm_corpus
    with pytest.raises(EmptyInputError):
        mine_poses({3: []}, corpus)


def test_pose_candidate_rejects_repeated_part(arm_corpus):
    _, items = arm_corpus
    with pytest.raises(ValueError):
        PoseCandidate(items=(items['up'], items['down']))


def test_remove_non_maximal(arm_corpus):
    _, items = arm_corpus
    small = PoseCandidate(items=(items['up'],))
    large = PoseCandidate(items=(items['leg'], items['up']))
    other = PoseCandidate(items=(items['down'],))
    assert remove_non_maximal([small, large, other]) == [large, other]


def test_corpus_from_dataset(tiny_dataset):
    corpus = build_corpus(tiny_dataset, frame_stride=2)
    assert len(corpus) == len(tiny_dataset)
    assert corpus.frame_indices[0] == (0, 2, 4)
    examples = collect_part_examples(corpus, max_examples=5)
    assert sorted(examples) == list(range(9))
    assert all(len(v) == 5 for v in examples.values())
    position = {sid: i for i, sid in enumerate(corpus.sample_ids)}
    drawn = [(position[e.sample_id], e.frame) for e in examples[0]]
    assert drawn == sorted(drawn)

    with pytest.raises(EmptyInputError):
        build_corpus(Dataset(samples=(), vocabulary=tiny_dataset.vocabulary))


# ==================== 剪枝 ====================

def _candidate(items, label, score):
    return PoseCandidate(items=tuple(items), discrimination={label: score}, label=label)


def test_greedy_cover_skips_similar_poses(arm_corpus):
    _, items = arm_corpus
    best = _candidate([items['up'], items['leg']], 'raise', 5.0)
    twin = _candidate([items['up'], items['leg']], 'raise', 4.0)
    different = _candidate([items['down']], 'raise', 3.0)
    assert pose_distance(best, twin) == pytest.approx(0.0, abs=1e-12)
    assert pose_distance(best, different) == float('inf')

    assert greedy_cover([different, twin, best]) == [best, different]


def _single_item(part_id, label, score, offset=0.0):
    positions = np.array([[0.0, 0.0, 0.0], [0.3, -0.5, 0.1], [0.1, -1.0, 0.2]]) + offset
    item = PartItem(f"p{part_id}i0", part_id, positions, np.zeros_like(positions), np.ones(3, dtype=bool), members=1)
    return _candidate([item], label, score)


def test_greedy_cover_removes_only_covered_poses():
    distinct = [_single_item(p, 'a', 10.0 - p) for p in range(7)]
    twins = [_single_item(p, 'a', 1.0 - 0.1 * p, offset=1e-3) for p in (0, 3, 6)]
    config = MiningConfig()
    kept = greedy_cover(distinct + twins, config)

    assert [c.pose_id for c in kept] == [c.pose_id for c in distinct]
    removed = [c for c in distinct + twins if all(c is not k for k in kept)]
    assert len(removed) == 3
    for candidate in removed:
        assert min(
            pose_distance(candidate, k, config.visibility_penalty, config.alignment) for k in kept
        ) <= config.similarity_threshold


def test_validation_ap():
    assert validation_ap([0.9, 0.1, 0.8], [True, False, True]) == pytest.approx(1.0)
    assert validation_ap([0.9, 0.1], [False, False]) == 0.0


def test_prune_by_validation_keeps_one_pose_per_class():
    poses = [
        SimpleNamespace(label='a', validation_ap=0.9),
        SimpleNamespace(label='a', validation_ap=0.1),
        SimpleNamespace(label='b', validation_ap=0.05),
        SimpleNamespace(label='b', validation_ap=0.15),
    ]
    kept, removed = prune_by_validation(poses, floor=0.2)
    assert kept == [poses[0], poses[3]]
    assert removed == [poses[1], poses[2]]


def test_prune_poses_with_validation(arm_corpus):
    _, items = arm_corpus
    first = _candidate([items['up'], items['leg']], 'raise', 5.0)
    second = _candidate([items['down']], 'raise', 3.0)
    pruned = prune_poses({'raise': [first, second]}, validation={first.pose_id: 0.1, second.pose_id: 0.6})
    assert pruned == {'raise': [second]}
    assert prune_poses({'raise': [first, second]}) == {'raise': [first, second]}
