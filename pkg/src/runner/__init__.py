"""
Runner Module - 阶段运行管理模块

包含阶段运行管理器和有序并行映射
"""

from .stage_runner import StageRunner, stage_scope

__all__ = ['StageRunner', 'stage_scope']
