"""
Schemas - Pydantic 配置 / 清单 / 归档模型
"""

from .config_schemas import *
from .manifest_schemas import *
from .archive_schemas import *
