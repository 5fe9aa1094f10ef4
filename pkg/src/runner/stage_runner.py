"""
Stage Runner - 阶段运行管理器

管理 CLI 阶段的生命周期（运行登记库状态、事件日志），并提供按输入顺序收集结果的线程池映射。
"""

import logging
import threading
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional

from sqlalchemy.exc import SQLAlchemyError

from ..core.errors import MstAogError
from ..db import RunRepository, get_db_context, init_db
from ..streaming.event_log import EventAction, EventCategory, EventLog


logger = logging.getLogger(__name__)

_worker = threading.local()


@contextmanager
def stage_scope(stage: str, events: Optional[EventLog] = None, **data) -> Iterator[Dict[str, Any]]:
    """
    流水线内部阶段（挖掘、训练、剪枝 ...）

    产出一个字典，阶段内写入的统计随 completed 事件一起记录。
    MstAogError 的 details 前加上阶段名后继续抛出。
    """
    stats: Dict[str, Any] = {}
    started = time.perf_counter()
    logger.info(f"[{stage}] 开始")
    if events is not None:
        events.emit(stage, EventCategory.LIFECYCLE, EventAction.STARTED, dict(data))
    try:
        yield stats
    except MstAogError as e:
        logger.error(f"[{stage}] 失败: {e.message}")
        e.details = f"stage={stage}" + (f"; {e.details}" if e.details else '')
        if events is not None:
            events.emit(stage, EventCategory.LIFECYCLE, EventAction.FAILED, e.to_dict())
        raise
    seconds = time.perf_counter() - started
    logger.info(f"[{stage}] 完成, 用时 {seconds:.2f}s")
    if events is not None:
        events.emit(stage, EventCategory.LIFECYCLE, EventAction.COMPLETED, {'seconds': round(seconds, 3), **stats})


class StageRunner:
    """阶段运行管理器（单例）"""

    _instance: Optional['StageRunner'] = None
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self.jobs = 1
        self.executor: Optional[ThreadPoolExecutor] = None
        self.events: Optional[EventLog] = None
        self.registry_enabled = False
        self.config_digest: Optional[str] = None
        self._initialized = True

    @classmethod
    def get_instance(cls) -> 'StageRunner':
        """获取单例实例"""
        return cls()

    def configure(
        self,
        jobs: int = 1,
        events: Optional[EventLog] = None,
        registry_url: Optional[str] = None,
        registry_enabled: bool = False,
        workdir: str = 'runs',
        config_digest: Optional[str] = None,
    ) -> 'StageRunner':
        """设置线程数、事件日志与运行登记库"""
        self.shutdown()
        self.jobs = max(1, int(jobs))
        self.executor = ThreadPoolExecutor(max_workers=self.jobs) if self.jobs > 1 else None
        self.events = events
        self.config_digest = config_digest
        self.registry_enabled = registry_enabled
        if registry_enabled:
            try:
                init_db(registry_url, workdir)
            except SQLAlchemyError as e:
                logger.error(f"运行登记库初始化失败, 不再登记: {e}")
                self.registry_enabled = False
        return self

    def map_ordered(self, fn: Callable, items: Iterable) -> List:
        """
        并行映射，结果按输入顺序返回

        在工作线程内部的嵌套调用顺序执行，避免线程池互相等待。
        """
        items = list(items)
        if self.executor is None or len(items) <= 1 or getattr(_worker, 'active', False):
            return [fn(item) for item in items]

        def run(item):
            _worker.active = True
            try:
                return fn(item)
            finally:
                _worker.active = False

        return list(self.executor.map(run, items))

    # ==================== 运行登记 ====================

    def _registry(self, action: Callable[[RunRepository], Any]) -> Any:
        if not self.registry_enabled:
            return None
        try:
            with get_db_context() as session:
                return action(RunRepository(session))
        except SQLAlchemyError as e:
            logger.error(f"运行登记失败: {e}")
            return None

    @contextmanager
    def run_stage(self, command: str, result_path: Optional[str] = None) -> Iterator[Dict[str, Any]]:
        """
        包装一个 CLI 阶段: 登记 pending -> running -> completed/failed，并写生命周期事件

        产出的字典作为运行统计保存。
        """
        stats: Dict[str, Any] = {}
        run_id = self._registry(lambda repo: repo.create(command, self.config_digest, result_path).id)
        if run_id is not None:
            self._registry(lambda repo: repo.mark_running(run_id))
        if self.events is not None:
            self.events.emit(command, EventCategory.LIFECYCLE, EventAction.STARTED, {'run_id': run_id})

        started = time.perf_counter()
        try:
            yield stats
        except Exception as e:
            error = e.message if isinstance(e, MstAogError) else str(e)
            logger.debug(traceback.format_exc())
            if run_id is not None:
                self._registry(lambda repo: repo.mark_failed(run_id, error))
            if self.events is not None:
                self.events.emit(command, EventCategory.LIFECYCLE, EventAction.FAILED, {'error': error})
            raise

        stats.setdefault('seconds', round(time.perf_counter() - started, 3))
        if run_id is not None:
            self._registry(lambda repo: repo.mark_completed(run_id, result_path, stats))
        if self.events is not None:
            self.events.emit(command, EventCategory.LIFECYCLE, EventAction.COMPLETED, dict(stats))

    def shutdown(self):
        """关闭线程池"""
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None
