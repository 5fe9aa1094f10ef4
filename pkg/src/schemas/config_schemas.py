"""
Config Schemas - 运行配置各分节的 Pydantic 模型

每个字段都带有与模块不变式一致的取值约束，配置在启动时整体校验。
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Section(BaseModel):
    """配置分节基类: 拒绝未知键"""
    model_config = ConfigDict(extra='forbid', frozen=True)


class FeatureConfig(_Section):
    """特征提取配置"""
    cell_size: int = Field(default=8, ge=2, description="HOG/HOF 单元格像素数")
    hog_bins: int = Field(default=9, ge=2, description="无符号梯度方向直方图 bin 数")
    hof_bins: int = Field(default=8, ge=2, description="光流方向 bin 数（另加一个静止 bin）")
    motion_threshold: float = Field(default=0.25, ge=0, description="静止判定阈值（像素/帧）")
    block_eps: float = Field(default=1e-4, gt=0, description="块归一化 epsilon")
    flow_alpha: float = Field(default=10.0, gt=0, description="光流平滑项权重")
    flow_iterations: int = Field(default=100, ge=1, description="每层光流迭代次数")
    flow_levels: int = Field(default=3, ge=1, description="光流金字塔层数")
    flow_max: float = Field(default=32.0, gt=0, description="光流幅值上限（像素/帧）")
    histogram_bins: int = Field(default=16, ge=2, description="强度直方图 bin 数")
    lowres_grid: int = Field(default=4, ge=1, description="低分辨率响应图的空间网格边长")
    num_scales: int = Field(default=5, ge=1, description="图像尺度金字塔层数")
    scale_step: float = Field(default=2 ** 0.5, gt=1, description="相邻尺度比例")


class GeometryConfig(_Section):
    """几何配置"""
    eigen_floor: float = Field(default=1e-6, gt=0, description="投影协方差特征值下限")
    sigma0: float = Field(default=0.3, gt=0, description="偏移高斯的初始标准差（归一化单位）")
    sigma_min: float = Field(default=1e-3, gt=0, description="学习得到的方差下限")


class ModelConfig(_Section):
    """模型结构配置"""
    num_view_bins: int = Field(default=10, ge=1, description="视角 bin 数 M")
    root_window: List[int] = Field(default_factory=lambda: [3, 3], description="根部件窗口 (高, 宽)，单位单元格")
    part_window: List[int] = Field(default_factory=lambda: [2, 2], description="子部件窗口 (高, 宽)")
    share_views: bool = Field(default=True, description="视角间共享 3D 几何并插值模板")
    use_lowres: bool = Field(default=True, description="动作节点包含低分辨率特征子节点")

    @field_validator('root_window', 'part_window')
    @classmethod
    def _check_window(cls, value: List[int]) -> List[int]:
        if len(value) != 2 or min(value) < 1:
            raise ValueError("窗口必须是两个正整数 (高, 宽)")
        return value


class InferenceConfig(_Section):
    """推断配置"""
    detection_threshold: float = Field(default=-1.0, description="检测分数阈值")
    nms_overlap: float = Field(default=0.5, gt=0, le=1, description="非极大值抑制面积重叠率")
    max_detections_per_frame: int = Field(default=5, ge=1)
    dt_method: Literal['diagonal', 'exact'] = Field(default='diagonal', description="相关协方差的距离变换路径")
    dt_dense_limit: int = Field(default=32, ge=0, description="网格边长不超过该值时距离变换使用向量化稠密求解")
    frame_stride: int = Field(default=1, ge=1, description="分类时的帧采样步长")


class MiningConfig(_Section):
    """姿态挖掘配置"""
    visibility_penalty: float = Field(default=1.0, gt=0, description="可见性惩罚 a")
    cluster_floor: int = Field(default=5, ge=1, description="聚类最小样本数")
    support_threshold: float = Field(default=0.3, gt=0, description="支持度阈值")
    discrimination_threshold: float = Field(default=2.0, gt=0, description="判别度阈值")
    similarity_threshold: float = Field(default=0.5, gt=0, description="集合覆盖剪枝的距离阈值")
    validation_floor: float = Field(default=0.2, gt=0, description="验证平均精度下限")
    max_clusters: int = Field(default=8, ge=1, description="特征间隙选择的聚类数上限")
    alignment: Literal['vertical', 'full'] = Field(default='vertical', description="部件相似变换的旋转自由度")
    max_examples_per_part: int = Field(default=300, ge=2)
    frame_stride: int = Field(default=3, ge=1, description="挖掘时的帧采样步长")
    max_items_per_pose: Optional[int] = Field(default=None, ge=1, description="候选层数上限，默认等于部件数")


class TrainingConfig(_Section):
    """参数学习配置"""
    C: float = Field(default=1.0, gt=0, description="SVM 正则化参数")
    eta: float = Field(default=1.0, ge=0, description="正样本距离阈值")
    num_negatives: int = Field(default=5000, ge=1)
    bootstrap_rounds: int = Field(default=2, ge=0)
    latent_iterations: int = Field(default=5, ge=1)
    tolerance: float = Field(default=1e-6, ge=0, description="隐变量交替的目标下降量低于该值时提前停止，0 表示总是运行 latent_iterations 次")
    epochs: int = Field(default=10, ge=1, description="每个凸优化步的随机次梯度轮数")
    latent_radius: int = Field(default=2, ge=0, description="隐变量位置搜索半径（单元格）")
    view_radius: int = Field(default=1, ge=0, description="隐变量视角搜索半径（bin）")
    max_positives: int = Field(default=200, ge=1)
    hard_negative_cap: int = Field(default=1000, ge=1)
    negative_frames: int = Field(default=60, ge=1, description="负样本帧池大小（随机抽取）")
    validation_fraction: float = Field(default=0.25, ge=0, lt=1)
    action_C: float = Field(default=1.0, gt=0)
    batch_size: Optional[int] = Field(default=1, ge=1, description="次梯度小批量大小，None 为全批量")
    action_epochs: int = Field(default=500, ge=1)


class ProtocolConfig(_Section):
    """实验划分协议配置"""
    name: Literal['cross-subject', 'cross-view', 'cross-environment'] = 'cross-view'
    holdout: List[str] = Field(default_factory=list, description="留出的被试/摄像机 ID，为空时取最后一个")
    test_manifest: Optional[str] = Field(default=None, description="跨环境协议的测试清单")


class SynthConfig(_Section):
    """合成数据配置"""
    classes: int = Field(default=3, ge=1, le=5)
    views: List[float] = Field(default_factory=lambda: [0.0, 60.0, 120.0], description="视角（度）")
    subjects: int = Field(default=6, ge=1)
    frames: int = Field(default=30, ge=2)
    width: int = Field(default=96, ge=16)
    height: int = Field(default=96, ge=16)
    pixels_per_unit: float = Field(default=22.0, gt=0, description="躯干单位长度对应的像素数")
    joint_noise: float = Field(default=0.0, ge=0, description="3D 关节噪声标准差（归一化单位）")
    pixel_noise: float = Field(default=0.0, ge=0, description="图像噪声标准差（灰度）")


class RegistryConfig(_Section):
    """运行登记库配置"""
    enabled: bool = True
    url: Optional[str] = Field(default=None, description="SQLAlchemy URL，默认在工作目录下使用 sqlite")


class RuntimeConfig(_Section):
    """运行时配置"""
    seed: int = Field(default=0, ge=0)
    jobs: Optional[int] = Field(default=None, ge=1, description="工作线程数，默认为 CPU 核数")
    workdir: str = Field(default='runs')
    log_level: str = Field(default='INFO')
    cache_frames: int = Field(default=4096, ge=1, description="帧特征缓存的最大帧数（最近最少使用淘汰）")


class RunConfig(_Section):
    """合并后的运行配置"""
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    mining: MiningConfig = Field(default_factory=MiningConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    registry: RegistryConfig = Field(default_factory=RegistryConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)

    @model_validator(mode='after')
    def _check_cross_section(self) -> 'RunConfig':
        if self.protocol.name == 'cross-environment' and not self.protocol.test_manifest:
            raise ValueError("cross-environment 协议需要配置 protocol.test_manifest")
        return self
