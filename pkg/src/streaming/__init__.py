"""
Streaming Module - 阶段事件日志
"""

from .event_log import EventAction, EventCategory, EventLog, StageEvent

__all__ = ['EventAction', 'EventCategory', 'EventLog', 'StageEvent']
