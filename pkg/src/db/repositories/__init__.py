"""
Repositories - 数据访问层
"""

from .run_repo import RunRepository

__all__ = ['RunRepository']
