"""
Event Log - 流水线阶段事件记录

每条事件写成一行 JSON（JSONL），字段与运行事件保持一致:
    {timestamp, sequence, stage, event: {category, action}, data}

写入失败不阻塞主流程，只记录错误日志。
"""

import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union


logger = logging.getLogger(__name__)


class EventCategory:
    """事件类别"""
    LIFECYCLE = 'lifecycle'
    MINING = 'mining'
    TRAINING = 'training'
    INFERENCE = 'inference'
    SYSTEM = 'system'


class EventAction:
    """事件动作"""
    STARTED = 'started'
    COMPLETED = 'completed'
    FAILED = 'failed'
    STEP = 'step'
    SKIPPED = 'skipped'


@dataclass
class StageEvent:
    """一条阶段事件"""
    timestamp: str
    sequence: int
    stage: str
    event: Dict[str, str]
    data: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'timestamp': self.timestamp,
            'sequence': self.sequence,
            'stage': self.stage,
            'event': dict(self.event),
            'data': self.data,
        }


def _now() -> str:
    now = datetime.utcnow()
    return now.strftime('%Y-%m-%dT%H:%M:%S.') + f'{now.microsecond // 1000:03d}Z'


class EventLog:
    """
    阶段事件日志

    path 为 None 时只保存在内存中（测试与库调用）。序列号单调递增，多线程安全。
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.events: List[StageEvent] = []
        self._sequence = 0
        self._lock = threading.Lock()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def emit(
        self,
        stage: str,
        category: str,
        action: str,
        data: Optional[Dict[str, Any]] = None,
    ) -> StageEvent:
        """记录一条事件并返回它"""
        with self._lock:
            self._sequence += 1
            event = StageEvent(
                timestamp=_now(),
                sequence=self._sequence,
                stage=stage,
                event={'category': category, 'action': action},
                data=data or {},
            )
            self.events.append(event)
            if self.path is not None:
                try:
                    with self.path.open('a', encoding='utf-8') as handle:
                        handle.write(json.dumps(event.to_dict(), ensure_ascii=False, default=str) + '\n')
                except OSError as e:
                    logger.error(f"事件写入失败 {self.path}: {e}")
        return event

    def of_stage(self, stage: str) -> List[StageEvent]:
        return [e for e in self.events if e.stage == stage]

    @staticmethod
    def read(path: Union[str, Path]) -> List[StageEvent]:
        """读取 JSONL 事件文件，跳过无法解析的行"""
        events = []
        for line in Path(path).read_text(encoding='utf-8').splitlines():
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                events.append(StageEvent(
                    timestamp=raw['timestamp'],
                    sequence=int(raw['sequence']),
                    stage=raw['stage'],
                    event=raw['event'],
                    data=raw.get('data') or {},
                ))
            except (json.JSONDecodeError, KeyError, ValueError) as e:
                logger.warning(f"跳过无法解析的事件行: {e}")
        return events
