"""
Database Connection - 运行登记库连接管理

默认使用工作目录下的 sqlite 文件 runs.db；可用 registry.url 或环境变量 DATABASE_URL 覆盖。
"""

import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Generator, Optional

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, Session

from .models import Base


logger = logging.getLogger(__name__)

# 数据库引擎
_engine = None
_SessionFactory = None


def get_database_url(workdir: str = 'runs', url: Optional[str] = None) -> str:
    """
    获取数据库连接 URL

    优先级: 显式 url > 环境变量 DATABASE_URL > sqlite:///<workdir>/runs.db
    """
    if url:
        return url
    database_url = os.environ.get('DATABASE_URL')
    if database_url:
        return database_url
    Path(workdir).mkdir(parents=True, exist_ok=True)
    return f"sqlite:///{Path(workdir) / 'runs.db'}"


def init_db(database_url: Optional[str] = None, workdir: str = 'runs'):
    """
    初始化数据库并创建表（如果不存在）

    Returns:
        会话工厂
    """
    global _engine, _SessionFactory

    url = get_database_url(workdir, database_url)
    _engine = create_engine(
        url,
        pool_pre_ping=True,
        echo=os.environ.get('DB_ECHO', 'false').lower() == 'true',
    )
    _SessionFactory = sessionmaker(bind=_engine)
    Base.metadata.create_all(_engine)
    logger.debug(f"运行登记库已初始化: {url}")
    return _SessionFactory


def create_new_session() -> Session:
    """
    创建新的独立数据库会话

    调用者负责在使用完后关闭 session。
    """
    if _SessionFactory is None:
        init_db()
    return _SessionFactory()


@contextmanager
def get_db_context() -> Generator[Session, None, None]:
    """
    数据库会话上下文管理器

    Usage:
        with get_db_context() as session:
            session.query(PipelineRun).all()
    """
    session = create_new_session()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def close_db():
    """关闭数据库连接"""
    global _engine, _SessionFactory
    if _engine:
        _engine.dispose()
    _engine = None
    _SessionFactory = None
