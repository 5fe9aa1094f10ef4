"""
数据模型 - 骨架、身体部件、视频样本与数据集

关节顺序与部件划分是固定的约定（见 JOINT_NAMES / DEFAULT_PARTS），
坐标系: y 轴竖直向下（与图像行方向一致），2D 坐标顺序为 (x, y) = (列, 行)。
"""

from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import IngestionError, SizeError


NUM_JOINTS = 21


class JointIndex(IntEnum):
    """21 关节索引表"""
    HEAD = 0
    NECK = 1
    TORSO = 2
    L_SHOULDER = 3
    L_ELBOW = 4
    L_WRIST = 5
    L_HAND = 6
    R_SHOULDER = 7
    R_ELBOW = 8
    R_WRIST = 9
    R_HAND = 10
    L_HIP = 11
    L_KNEE = 12
    L_ANKLE = 13
    L_FOOT = 14
    R_HIP = 15
    R_KNEE = 16
    R_ANKLE = 17
    R_FOOT = 18
    SPINE = 19
    HIP_CENTER = 20


JOINT_NAMES: Tuple[str, ...] = tuple(j.name.lower() for j in JointIndex)

# 骨架连线，用于合成数据的火柴人渲染
BONES: Tuple[Tuple[int, int], ...] = (
    (JointIndex.HEAD, JointIndex.NECK),
    (JointIndex.NECK, JointIndex.TORSO),
    (JointIndex.TORSO, JointIndex.SPINE),
    (JointIndex.SPINE, JointIndex.HIP_CENTER),
    (JointIndex.NECK, JointIndex.L_SHOULDER),
    (JointIndex.L_SHOULDER, JointIndex.L_ELBOW),
    (JointIndex.L_ELBOW, JointIndex.L_WRIST),
    (JointIndex.L_WRIST, JointIndex.L_HAND),
    (JointIndex.NECK, JointIndex.R_SHOULDER),
    (JointIndex.R_SHOULDER, JointIndex.R_ELBOW),
    (JointIndex.R_ELBOW, JointIndex.R_WRIST),
    (JointIndex.R_WRIST, JointIndex.R_HAND),
    (JointIndex.HIP_CENTER, JointIndex.L_HIP),
    (JointIndex.L_HIP, JointIndex.L_KNEE),
    (JointIndex.L_KNEE, JointIndex.L_ANKLE),
    (JointIndex.L_ANKLE, JointIndex.L_FOOT),
    (JointIndex.HIP_CENTER, JointIndex.R_HIP),
    (JointIndex.R_HIP, JointIndex.R_KNEE),
    (JointIndex.R_KNEE, JointIndex.R_ANKLE),
    (JointIndex.R_ANKLE, JointIndex.R_FOOT),
)


class SplitProtocol(str, Enum):
    """实验划分协议"""
    CROSS_SUBJECT = "cross-subject"
    CROSS_VIEW = "cross-view"
    CROSS_ENVIRONMENT = "cross-environment"


@dataclass(frozen=True, eq=False)
class Joint:
    """单个关节: 位置、运动（帧差）、可见性"""
    position: np.ndarray
    motion: np.ndarray
    visible: bool

    def to_dict(self) -> Dict:
        return {
            'position': [float(v) for v in self.position],
            'motion': [float(v) for v in self.motion],
            'visible': bool(self.visible),
        }


@dataclass(frozen=True, eq=False)
class Skeleton3D:
    """
    单帧 3D 骨架

    以数组形式存储 21 个关节，`joints` 属性按固定顺序返回 Joint 列表。
    """
    positions: np.ndarray
    motions: np.ndarray
    visible: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        motions = np.asarray(self.motions, dtype=np.float64)
        visible = np.asarray(self.visible, dtype=bool)
        if positions.shape != (NUM_JOINTS, 3) or motions.shape != (NUM_JOINTS, 3):
            raise SizeError(
                f"骨架必须包含 {NUM_JOINTS} 个关节, 得到 positions={positions.shape}, motions={motions.shape}"
            )
        if visible.shape != (NUM_JOINTS,):
            raise SizeError(f"可见性标记长度必须为 {NUM_JOINTS}, 得到 {visible.shape}")
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'motions', motions)
        object.__setattr__(self, 'visible', visible)

    @classmethod
    def from_positions(
        cls,
        positions: np.ndarray,
        visible: Optional[np.ndarray] = None,
        timestamp: int = 0,
        previous: Optional['Skeleton3D'] = None,
    ) -> 'Skeleton3D':
        """由位置构造骨架，运动向量取与上一帧的差（无上一帧时为零）"""
        positions = np.asarray(positions, dtype=np.float64)
        if previous is None:
            motions = np.zeros_like(positions)
        else:
            motions = positions - previous.positions
        if visible is None:
            visible = np.ones(NUM_JOINTS, dtype=bool)
        return cls(positions=positions, motions=motions, visible=visible, timestamp=timestamp)

    @property
    def joints(self) -> List[Joint]:
        return [
            Joint(self.positions[j].copy(), self.motions[j].copy(), bool(self.visible[j]))
            for j in range(NUM_JOINTS)
        ]

    def with_arrays(self, positions: np.ndarray, motions: np.ndarray) -> 'Skeleton3D':
        return replace(self, positions=positions, motions=motions)


def sequence_from_positions(
    positions: np.ndarray,
    visible: Optional[np.ndarray] = None,
) -> Tuple[Skeleton3D, ...]:
    """
    由 (T, 21, 3) 位置数组构造帧对齐的骨架序列

    第 t 帧的运动为 position(t) - position(t-1)，第 0 帧运动为零。
    """
    positions = np.asarray(positions, dtype=np.float64)
    if visible is None:
        visible = np.ones(positions.shape[:2], dtype=bool)
    frames: List[Skeleton3D] = []
    previous = None
    for t in range(positions.shape[0]):
        skeleton = Skeleton3D.from_positions(positions[t], visible[t], timestamp=t, previous=previous)
        frames.append(skeleton)
        previous = skeleton
    return tuple(frames)


@dataclass(frozen=True)
class PartDefinition:
    """身体部件: 编号、名称、关节集合与锚点关节（近端关节）"""
    part_id: int
    name: str
    joints: Tuple[int, ...]
    anchor: int

    def to_dict(self) -> Dict:
        return {
            'part_id': self.part_id,
            'name': self.name,
            'joints': [int(j) for j in self.joints],
            'anchor': int(self.anchor),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'PartDefinition':
        return cls(
            part_id=int(data['part_id']),
            name=str(data['name']),
            joints=tuple(int(j) for j in data['joints']),
            anchor=int(data['anchor']),
        )


J = JointIndex

# K = 9 部件，部件 0 为根部件；集合允许重叠（手臂与手部区域共享腕/手关节）
DEFAULT_PARTS: Tuple[PartDefinition, ...] = (
    PartDefinition(0, 'torso', (J.NECK, J.TORSO, J.SPINE), J.TORSO),
    PartDefinition(1, 'head', (J.HEAD, J.NECK), J.HEAD),
    PartDefinition(2, 'left_arm', (J.L_SHOULDER, J.L_ELBOW, J.L_WRIST, J.L_HAND), J.L_SHOULDER),
    PartDefinition(3, 'right_arm', (J.R_SHOULDER, J.R_ELBOW, J.R_WRIST, J.R_HAND), J.R_SHOULDER),
    PartDefinition(4, 'left_leg', (J.L_HIP, J.L_KNEE, J.L_ANKLE, J.L_FOOT), J.L_HIP),
    PartDefinition(5, 'right_leg', (J.R_HIP, J.R_KNEE, J.R_ANKLE, J.R_FOOT), J.R_HIP),
    PartDefinition(6, 'left_hand', (J.L_WRIST, J.L_HAND), J.L_WRIST),
    PartDefinition(7, 'right_hand', (J.R_WRIST, J.R_HAND), J.R_WRIST),
    PartDefinition(8, 'hip', (J.HIP_CENTER, J.L_HIP, J.R_HIP), J.HIP_CENTER),
)

ROOT_PART_ID = 0


@dataclass(frozen=True)
class BoundingBox:
    """前景包围盒，像素坐标 (x, y, w, h)"""
    x: int
    y: int
    w: int
    h: int

    def to_list(self) -> List[int]:
        return [self.x, self.y, self.w, self.h]


class FrameReader:
    """
    帧读取器 - 延迟解码编号的 PNG/PGM 帧

    每次访问都重新读取文件，不持有可变缓存，可被多个工作线程共享。
    """

    FRAME_SUFFIXES = ('.png', '.pgm')

    def __init__(self, frames_dir: Path):
        self.frames_dir = Path(frames_dir)
        if not self.frames_dir.is_dir():
            raise IngestionError("帧目录不存在", path=str(self.frames_dir))
        self.paths: Tuple[Path, ...] = tuple(sorted(
            p for p in self.frames_dir.iterdir()
            if p.suffix.lower() in self.FRAME_SUFFIXES
        ))
        if not self.paths:
            raise IngestionError("帧目录中没有 PNG/PGM 帧", path=str(self.frames_dir))

    def __len__(self) -> int:
        return len(self.paths)

    def read(self, index: int) -> np.ndarray:
        from PIL import Image

        path = self.paths[index]
        try:
            with Image.open(path) as image:
                return np.asarray(image.convert('L'), dtype=np.float64)
        except OSError as e:
            raise IngestionError(f"无法解码帧 ({e})", path=str(path))


@dataclass(frozen=True, eq=False)
class VideoSample:
    """
    视频样本

    帧可以来自磁盘（FrameReader，延迟解码）或内存数组（测试 / 合成数据）。
    骨架、包围盒与 2D 关节（若存在）与帧逐帧对齐。
    """
    sample_id: str
    action: str
    subject: Optional[str] = None
    camera: Optional[str] = None
    reader: Optional[FrameReader] = None
    frame_arrays: Optional[Tuple[np.ndarray, ...]] = None
    skeletons: Optional[Tuple[Skeleton3D, ...]] = None
    boxes: Optional[Tuple[BoundingBox, ...]] = None
    joints2d: Optional[np.ndarray] = None
    environment: Optional[str] = None

    @property
    def num_frames(self) -> int:
        if self.frame_arrays is not None:
            return len(self.frame_arrays)
        if self.reader is not None:
            return len(self.reader)
        if self.skeletons is not None:
            return len(self.skeletons)
        return 0

    @property
    def has_skeletons(self) -> bool:
        return bool(self.skeletons)

    def frame(self, index: int) -> np.ndarray:
        """返回第 index 帧的灰度图（float64，0-255）"""
        if self.frame_arrays is not None:
            return np.asarray(self.frame_arrays[index], dtype=np.float64)
        if self.reader is not None:
            return self.reader.read(index)
        raise IngestionError(f"样本 {self.sample_id} 没有图像帧")

    def box(self, index: int) -> Optional[BoundingBox]:
        if self.boxes is None:
            return None
        return self.boxes[index]

    def to_dict(self) -> Dict:
        return {
            'id': self.sample_id,
            'action': self.action,
            'subject': self.subject,
            'camera': self.camera,
            'environment': self.environment,
            'num_frames': self.num_frames,
            'has_skeletons': self.has_skeletons,
            'has_boxes': self.boxes is not None,
            'has_joints2d': self.joints2d is not None,
        }


@dataclass(frozen=True, eq=False)
class Dataset:
    """数据集: 样本列表、动作词表与划分协议描述"""
    samples: Tuple[VideoSample, ...]
    vocabulary: Tuple[str, ...]
    protocol: str = ''
    source: Optional[str] = None

    def __post_init__(self):
        vocab = set(self.vocabulary)
        for sample in self.samples:
            if sample.action not in vocab:
                raise IngestionError(
                    f"样本 {sample.sample_id} 的动作 '{sample.action}' 不在词表中"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def subset(self, samples: Sequence[VideoSample], protocol: Optional[str] = None) -> 'Dataset':
        return Dataset(
            samples=tuple(samples),
            vocabulary=self.vocabulary,
            protocol=self.protocol if protocol is None else protocol,
            source=self.source,
        )

    def summary(self) -> Dict:
        return {
            'num_samples': len(self.samples),
            'vocabulary': list(self.vocabulary),
            'subjects': sorted({s.subject for s in self.samples if s.subject is not None}),
            'cameras': sorted({s.camera for s in self.samples if s.camera is not None}),
            'protocol': self.protocol,
        }
