"""
Database Module - 运行登记库

包含 SQLAlchemy 模型定义和数据库连接管理
"""

from .database import close_db, create_new_session, get_db_context, init_db
from .models import PipelineRun, RunStatus
from .repositories import RunRepository

__all__ = [
    'close_db',
    'create_new_session',
    'get_db_context',
    'init_db',
    'PipelineRun',
    'RunStatus',
    'RunRepository',
]
