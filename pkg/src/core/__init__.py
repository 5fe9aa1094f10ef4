"""
Core - 流水线核心模块

包含：
- errors: 异常层级与退出码
- config: 配置管理
- data_models: 骨架、部件、视频样本与数据集
- skeleton: 骨架归一化
- dataset: 清单与数据文件读取
- splits: 实验协议划分
- output_formatter: 输出格式化
"""

from .errors import (
    ConfigurationError,
    DegenerateSkeletonError,
    EmptyInputError,
    IngestionError,
    MstAogError,
    NumericError,
    SizeError,
    SkeletonParseError,
    UnderdeterminedError,
    UsageError,
)
from .config import Config, ensure_configured, get_config, setup_config
from .data_models import (
    DEFAULT_PARTS,
    NUM_JOINTS,
    ROOT_PART_ID,
    BoundingBox,
    Dataset,
    FrameReader,
    JointIndex,
    PartDefinition,
    Skeleton3D,
    SplitProtocol,
    VideoSample,
    sequence_from_positions,
)
from .skeleton import NormalizedSequence, normalize_sequence, normalize_skeleton
from .dataset import load_dataset, read_manifest
from .splits import split_dataset
from .output_formatter import OutputFormatter

__all__ = [
    # errors
    'ConfigurationError',
    'DegenerateSkeletonError',
    'EmptyInputError',
    'IngestionError',
    'MstAogError',
    'NumericError',
    'SizeError',
    'SkeletonParseError',
    'UnderdeterminedError',
    'UsageError',
    # config
    'Config',
    'ensure_configured',
    'get_config',
    'setup_config',
    # data_models
    'DEFAULT_PARTS',
    'NUM_JOINTS',
    'ROOT_PART_ID',
    'BoundingBox',
    'Dataset',
    'FrameReader',
    'JointIndex',
    'PartDefinition',
    'Skeleton3D',
    'SplitProtocol',
    'VideoSample',
    'sequence_from_positions',
    # skeleton / dataset / splits
    'NormalizedSequence',
    'normalize_sequence',
    'normalize_skeleton',
    'load_dataset',
    'read_manifest',
    'split_dataset',
    # output_formatter
    'OutputFormatter',
]
