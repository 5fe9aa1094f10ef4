"""
Archive Schemas - 模型归档索引 (index.json) 的 Pydantic 模型

权重数组不写入索引，索引只记录每个数组在 weights.bin 中的偏移与形状。
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from .config_schemas import FeatureConfig, ModelConfig


ARCHIVE_FORMAT_VERSION = 1


class ArrayRecord(BaseModel):
    """weights.bin 中一个数组的位置（按 float32 元素计数）"""
    offset: int = Field(..., ge=0, description="起始元素偏移")
    shape: List[int] = Field(..., description="数组形状")


class PartRecord(BaseModel):
    """部件定义"""
    part_id: int = Field(..., ge=0)
    name: str
    joints: List[int]
    anchor: int


class OffsetRecord(BaseModel):
    """子部件相对根部件的 3D 偏移高斯（对角协方差）"""
    part_id: int = Field(..., ge=0)
    mean: List[float] = Field(..., min_length=3, max_length=3)
    variances: List[float] = Field(..., min_length=3, max_length=3)


class PoseRecord(BaseModel):
    """姿态节点的标量与几何参数；外观 / 运动模板存放在 weights.bin"""
    pose_id: str = Field(..., description="姿态 ID")
    label: str = Field(..., description="挖掘该姿态的动作类别")
    items: List[str] = Field(default_factory=list, description="组成姿态的部件项 ID")
    part_ids: List[int] = Field(..., description="部件顺序，首个为根部件")
    root_window: List[int]
    part_window: List[int]
    view_centers: List[float] = Field(..., min_length=1, description="视角 bin 中心（弧度）")
    share_views: bool = True
    model_scale: float = Field(..., gt=0, description="每归一化单位对应的特征单元格数")
    eigen_floor: float = Field(default=1e-6, gt=0)
    bias: float = 0.0
    offsets: List[OffsetRecord] = Field(default_factory=list)
    bin_means: Optional[List[List[List[float]]]] = Field(default=None, description="各视角 bin 独立的 2D 偏移均值")
    projections: Dict[str, Dict[str, float]] = Field(default_factory=dict, description="训练相机 -> 投影参数")
    discrimination: float = 0.0
    validation_ap: Optional[float] = None
    response_mean: float = 0.0
    response_std: float = Field(default=1.0, gt=0)
    templates: Dict[str, str] = Field(default_factory=dict, description="部件 ID -> 模板数组键")


class ActionRecord(BaseModel):
    """动作节点"""
    label: str
    pose_ids: List[str]
    num_lowres: int = Field(..., ge=0)
    bias: float = 0.0
    weights: str = Field(..., description="权重数组键")


class ArchiveIndex(BaseModel):
    """index.json 根对象"""
    format_version: int = Field(default=ARCHIVE_FORMAT_VERSION)
    vocabulary: List[str]
    features: FeatureConfig
    model: ModelConfig
    parts: List[PartRecord]
    poses: List[PoseRecord]
    actions: List[ActionRecord]
    arrays: Dict[str, ArrayRecord]
