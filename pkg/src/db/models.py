"""
Database Models - SQLAlchemy 数据库模型定义
"""

from datetime import datetime
from enum import Enum

from sqlalchemy import Column, String, Integer, DateTime, Text, JSON
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class RunStatus(str, Enum):
    """运行状态枚举"""
    PENDING = 'pending'
    RUNNING = 'running'
    COMPLETED = 'completed'
    FAILED = 'failed'


class PipelineRun(Base):
    """流水线阶段运行记录（每次 CLI 子命令一条）"""
    __tablename__ = 'pipeline_run'

    id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String(32), nullable=False, comment='子命令 (ingest/synth/mine/train/infer/eval)')
    config_digest = Column(String(64), nullable=True, comment='运行配置的 SHA-256 摘要')
    status = Column(String(20), default=RunStatus.PENDING.value, comment='运行状态')

    # 执行结果
    result_path = Column(Text, nullable=True, comment='输出路径')
    error = Column(Text, nullable=True, comment='错误信息')
    statistics = Column(JSON, nullable=True, comment='运行统计')

    # 时间戳
    started_at = Column(DateTime, nullable=True)
    completed_at = Column(DateTime, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)

    def to_dict(self) -> dict:
        """转换为字典，时间戳为 ISO 8601 字符串"""
        record = {column.name: getattr(self, column.name) for column in self.__table__.columns}
        for key, value in record.items():
            if isinstance(value, datetime):
                record[key] = value.isoformat()
        return record
