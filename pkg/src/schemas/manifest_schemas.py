"""
Manifest Schemas - 数据清单记录模型

清单为 JSON Lines 文件，每行一个样本记录。
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class ManifestRecord(BaseModel):
    """单个样本的清单记录，路径相对清单所在目录解析"""
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    id: str = Field(..., min_length=1, description="样本 ID")
    action: str = Field(..., min_length=1, description="动作标签")
    subject: str = Field(..., description="被试 ID")
    camera: str = Field(..., description="摄像机 / 视角 ID")
    frames_dir: str = Field(..., description="帧目录")
    skeleton_file: Optional[str] = Field(default=None, description="骨架文件")
    bbox_file: Optional[str] = Field(default=None, description="前景包围盒文件")
    joints2d_file: Optional[str] = Field(default=None, description="2D 关节标注文件")
    environment: Optional[str] = Field(default=None, description="采集环境")


class DatasetIndex(BaseModel):
    """ingest 阶段输出的数据集索引摘要"""
    manifest: str
    num_samples: int
    vocabulary: list
    subjects: list
    cameras: list
    protocol: str = ''
