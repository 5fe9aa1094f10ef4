"""
Run Repository - 运行记录数据访问层

一次 CLI 子命令对应一条记录，状态依次为 pending -> running -> completed / failed。
"""

from datetime import datetime
from typing import Dict, List, Optional

from sqlalchemy import func
from sqlalchemy.orm import Session

from ..models import PipelineRun, RunStatus


class RunRepository:
    """运行记录仓库"""

    def __init__(self, session: Session):
        self.session = session

    def create(
        self,
        command: str,
        config_digest: Optional[str] = None,
        result_path: Optional[str] = None,
    ) -> PipelineRun:
        """登记一次 pending 状态的运行"""
        run = PipelineRun(
            command=command,
            config_digest=config_digest,
            result_path=result_path,
            status=RunStatus.PENDING.value,
        )
        self.session.add(run)
        self.session.commit()
        self.session.refresh(run)
        return run

    def get_by_id(self, run_id: int) -> Optional[PipelineRun]:
        return self.session.get(PipelineRun, run_id)

    def list(self, command: Optional[str] = None, status: Optional[str] = None, limit: int = 20) -> List[PipelineRun]:
        """按登记顺序倒序列出运行记录"""
        query = self.session.query(PipelineRun)
        if command:
            query = query.filter(PipelineRun.command == command)
        if status:
            query = query.filter(PipelineRun.status == status)
        return query.order_by(PipelineRun.id.desc()).limit(limit).all()

    def latest(self, command: str, config_digest: Optional[str] = None) -> Optional[PipelineRun]:
        """某个子命令最近一次成功的运行；给定 config_digest 时只匹配同一配置"""
        query = self.session.query(PipelineRun).filter(
            PipelineRun.command == command,
            PipelineRun.status == RunStatus.COMPLETED.value,
        )
        if config_digest:
            query = query.filter(PipelineRun.config_digest == config_digest)
        return query.order_by(PipelineRun.id.desc()).first()

    def count_by_status(self) -> Dict[str, int]:
        rows = self.session.query(PipelineRun.status, func.count(PipelineRun.id)).group_by(PipelineRun.status).all()
        return {status: int(count) for status, count in rows}

    # ==================== 状态迁移 ====================

    def _transition(self, run_id: int, status: RunStatus, **fields) -> bool:
        run = self.get_by_id(run_id)
        if run is None:
            return False
        run.status = status.value
        now = datetime.utcnow()
        if status is RunStatus.RUNNING:
            run.started_at = now
        else:
            run.completed_at = now
        for key, value in fields.items():
            if value is not None:
                setattr(run, key, value)
        self.session.commit()
        return True

    def mark_running(self, run_id: int) -> bool:
        return self._transition(run_id, RunStatus.RUNNING)

    def mark_completed(
        self,
        run_id: int,
        result_path: Optional[str] = None,
        statistics: Optional[dict] = None,
    ) -> bool:
        return self._transition(run_id, RunStatus.COMPLETED, result_path=result_path, statistics=statistics)

    def mark_failed(self, run_id: int, error: str) -> bool:
        return self._transition(run_id, RunStatus.FAILED, error=error)

    def delete(self, run_id: int) -> bool:
        """删除运行记录"""
        run = self.get_by_id(run_id)
        if run is None:
            return False
        self.session.delete(run)
        self.session.commit()
        return True
