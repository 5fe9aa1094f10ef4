"""
运行时测试: 阶段事件日志、阶段作用域、有序并行映射与运行登记库
"""

import threading
import time

import pytest

from src.core import EmptyInputError
from src.db import RunRepository, RunStatus, create_new_session, init_db
from src.runner import StageRunner, stage_scope
from src.streaming import EventAction, EventCategory, EventLog


# ==================== 事件日志 ====================

def test_event_log_writes_jsonl(tmp_path):
    path = tmp_path / 'logs' / 'events.jsonl'
    log = EventLog(path)
    log.emit('mine', EventCategory.MINING, EventAction.STEP, {'label': 'walk', 'kept': ['a']})
    log.emit('train', EventCategory.TRAINING, EventAction.SKIPPED)

    events = EventLog.read(path)
    assert [e.sequence for e in events] == [1, 2]
    assert events[0].event == {'category': 'mining', 'action': 'step'}
    assert events[0].data == {'label': 'walk', 'kept': ['a']}
    assert events[1].data == {}
    assert events[0].timestamp.endswith('Z')
    assert [e.stage for e in log.of_stage('train')] == ['train']


def test_event_log_skips_unreadable_lines(tmp_path):
    path = tmp_path / 'events.jsonl'
    EventLog(path).emit('eval', EventCategory.INFERENCE, EventAction.COMPLETED, {'accuracy': 0.5})
    with path.open('a', encoding='utf-8') as handle:
        handle.write('{not json\n\n{"stage": "x"}\n')
    events = EventLog.read(path)
    assert len(events) == 1
    assert events[0].data['accuracy'] == 0.5


def test_sequence_numbers_are_unique_across_threads():
    log = EventLog()
    threads = [
        threading.Thread(target=lambda: [log.emit('s', EventCategory.SYSTEM, EventAction.STEP) for _ in range(50)])
        for _ in range(4)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(e.sequence for e in log.events) == list(range(1, 201))


# ==================== 阶段作用域 ====================

def test_stage_scope_records_statistics():
    log = EventLog()
    with stage_scope('mine', log, poses=3) as stats:
        stats['kept'] = 2
    started, completed = log.of_stage('mine')
    assert started.event['action'] == EventAction.STARTED
    assert started.data == {'poses': 3}
    assert completed.event['action'] == EventAction.COMPLETED
    assert completed.data['kept'] == 2
    assert completed.data['seconds'] >= 0


def test_stage_scope_prefixes_failure_details():
    log = EventLog()
    with pytest.raises(EmptyInputError) as info:
        with stage_scope('train-poses', log):
            raise EmptyInputError('没有正样本', details='pose=walk:p3i0')
    assert info.value.details == 'stage=train-poses; pose=walk:p3i0'
    failed = log.of_stage('train-poses')[-1]
    assert failed.event['action'] == EventAction.FAILED
    assert failed.data['error'] == 'EmptyInputError'
    assert failed.data['exit_code'] == 2


# ==================== 有序并行映射 ====================

def test_map_ordered_keeps_input_order():
    runner = StageRunner.get_instance().configure(jobs=4)

    def slow_square(x):
        time.sleep(0.01 * (5 - x % 5))
        return x * x

    assert runner.map_ordered(slow_square, range(12)) == [x * x for x in range(12)]
    assert StageRunner.get_instance() is runner


def test_nested_map_runs_inline():
    runner = StageRunner.get_instance().configure(jobs=2)

    def outer(x):
        return runner.map_ordered(lambda y: (x, y), range(3))

    assert runner.map_ordered(outer, range(2)) == [[(x, y) for y in range(3)] for x in range(2)]


def test_single_job_runs_serially():
    runner = StageRunner.get_instance().configure(jobs=1)
    assert runner.executor is None
    assert runner.map_ordered(lambda x: x + 1, [1, 2]) == [2, 3]


# ==================== 运行登记 ====================

@pytest.fixture
def registry(tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    log = EventLog()
    runner = StageRunner.get_instance().configure(
        events=log, registry_url=url, registry_enabled=True, config_digest='abc123',
    )
    return runner, log


def test_run_stage_records_completed_run(registry):
    runner, log = registry
    with runner.run_stage('train', result_path='model') as stats:
        stats['poses'] = 4

    session = create_new_session()
    try:
        runs = RunRepository(session).list()
        assert len(runs) == 1
        run = runs[0]
        assert run.status == RunStatus.COMPLETED.value
        assert run.command == 'train' and run.config_digest == 'abc123'
        assert run.statistics['poses'] == 4
        assert run.started_at is not None and run.completed_at is not None
    finally:
        session.close()
    assert [e.event['action'] for e in log.of_stage('train')] == ['started', 'completed']


def test_run_stage_records_failure(registry):
    runner, log = registry
    with pytest.raises(EmptyInputError):
        with runner.run_stage('mine'):
            raise EmptyInputError('没有部件项')

    session = create_new_session()
    try:
        run = RunRepository(session).list(command='mine')[0]
        assert run.status == RunStatus.FAILED.value
        assert run.error == '没有部件项'
    finally:
        session.close()
    assert log.of_stage('mine')[-1].data == {'error': '没有部件项'}


def test_run_repository_lifecycle(tmp_path):
    init_db(f"sqlite:///{tmp_path / 'crud.db'}")
    session = create_new_session()
    try:
        repo = RunRepository(session)
        run = repo.create('eval', config_digest='d1')
        assert run.status == RunStatus.PENDING.value
        assert repo.mark_running(run.id)
        assert repo.get_by_id(run.id).started_at is not None
        assert repo.latest('eval') is None
        assert repo.mark_completed(run.id, statistics={'accuracy': 1.0})
        assert repo.get_by_id(run.id).to_dict()['statistics'] == {'accuracy': 1.0}

        failed = repo.create('eval', config_digest='d2')
        assert repo.mark_failed(failed.id, '没有视频')
        assert repo.latest('eval').id == run.id
        assert repo.latest('eval', config_digest='d2') is None
        assert repo.count_by_status() == {'completed': 1, 'failed': 1}
        assert [r.id for r in repo.list(status=RunStatus.FAILED.value)] == [failed.id]

        assert repo.delete(run.id)
        assert not repo.delete(run.id)
        assert not repo.mark_running(999)
    finally:
        session.close()
