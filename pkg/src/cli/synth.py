"""
合成数据 - 参数化火柴人动作

每个 (动作, 被试) 生成一段 3D 骨架运动，再从配置的多个视角用缩放正交投影渲染成灰度帧。
同一段表演在所有视角共享，视角之间只有摄像机不同。

坐标约定: y 竖直向下（与图像行一致），髋中心为原点，首帧肩轴（左 -> 右）沿 +x，
人面向 -z。视角 theta 处的摄像机坐标为 yaw_matrix(theta) @ X，图像坐标为 k * (x, y) + 中心。
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from ..core.data_models import (
    BONES,
    NUM_JOINTS,
    BoundingBox,
    Dataset,
    JointIndex as J,
    VideoSample,
    sequence_from_positions,
)
from ..core.errors import IngestionError
from ..core.skeleton import yaw_matrix
from ..schemas.config_schemas import SynthConfig
from ..schemas.manifest_schemas import ManifestRecord


logger = logging.getLogger(__name__)

# 一个躯干单位对应的米数
TORSO_METERS = 0.5
BACKGROUND = 40
FOREGROUND = 220
LINE_WIDTH = 3
HEAD_RADIUS = 4
BOX_MARGIN = 4

# 肢体长度（躯干单位）
UPPER_ARM, FOREARM, HAND = 0.55, 0.5, 0.15
THIGH, SHIN, FOOT = 0.8, 0.75, 0.2

LEFT, RIGHT = -1.0, 1.0


# ==================== 姿态参数 ====================

@dataclass(frozen=True)
class LimbAngles:
    """肢体方向: abduction 为冠状面外展（0 下垂，pi/2 水平侧举，pi 上举），flexion 为向前屈曲"""
    abduction: float = 0.0
    flexion: float = 0.0


@dataclass(frozen=True)
class BodyPose:
    """一帧的关节角"""
    upper_arm: Tuple[LimbAngles, LimbAngles] = (LimbAngles(0.15), LimbAngles(0.15))
    forearm: Tuple[LimbAngles, LimbAngles] = (LimbAngles(0.15), LimbAngles(0.15))
    thigh: Tuple[LimbAngles, LimbAngles] = (LimbAngles(0.05), LimbAngles(0.05))
    knee: Tuple[float, float] = (0.0, 0.0)
    bend: float = 0.0


def _direction(angles: LimbAngles, side: float) -> np.ndarray:
    a, f = angles.abduction, angles.flexion
    d = np.array([side * np.sin(a), np.cos(a) * np.cos(f), -np.cos(a) * np.sin(f)])
    return d / np.linalg.norm(d)


def _envelope(phase: float) -> float:
    """0 -> 1 -> 0 的平滑包络"""
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * phase))


def raise_arms(phase: float) -> BodyPose:
    a = 0.15 + 2.8 * _envelope(phase)
    arm = (LimbAngles(a), LimbAngles(a))
    return BodyPose(upper_arm=arm, forearm=arm)


def squat(phase: float) -> BodyPose:
    e = _envelope(phase)
    arm = (LimbAngles(0.1, 1.4 * e), LimbAngles(0.1, 1.4 * e))
    thigh = (LimbAngles(0.05, 1.3 * e), LimbAngles(0.05, 1.3 * e))
    return BodyPose(upper_arm=arm, forearm=arm, thigh=thigh, knee=(2.0 * e, 2.0 * e), bend=0.3 * e)


def kick(phase: float) -> BodyPose:
    e = _envelope(phase)
    arm = (LimbAngles(0.35 + 0.3 * e), LimbAngles(0.35 + 0.3 * e))
    thigh = (LimbAngles(0.05), LimbAngles(0.05, 1.4 * e))
    return BodyPose(upper_arm=arm, forearm=arm, thigh=thigh)


def wave(phase: float) -> BodyPose:
    e = _envelope(phase)
    upper = (LimbAngles(0.15), LimbAngles(0.15 + 1.4 * e))
    fore = (LimbAngles(0.15), LimbAngles(0.15 + e * (2.7 + 0.4 * np.sin(6.0 * np.pi * phase))))
    return BodyPose(upper_arm=upper, forearm=fore)


def bend(phase: float) -> BodyPose:
    e = _envelope(phase)
    arm = (LimbAngles(0.1, 1.2 * e), LimbAngles(0.1, 1.2 * e))
    return BodyPose(upper_arm=arm, forearm=arm, bend=1.2 * e)


MOTIONS: Dict[str, Callable[[float], BodyPose]] = {
    'raise_arms': raise_arms,
    'squat': squat,
    'kick': kick,
    'wave': wave,
    'bend': bend,
}


# ==================== 骨架 ====================

def body_joints(pose: BodyPose) -> np.ndarray:
    """关节角 -> (21, 3) 规范坐标（躯干单位），双脚中较低者落在站立地面上"""
    p = np.zeros((NUM_JOINTS, 3))
    p[J.HIP_CENTER] = (0.0, 0.0, 0.0)
    p[J.SPINE] = (0.0, -0.35, 0.0)
    p[J.TORSO] = (0.0, -0.7, 0.0)
    p[J.NECK] = (0.0, -1.0, 0.0)
    p[J.HEAD] = (0.0, -1.35, 0.0)

    arms = ((J.L_SHOULDER, J.L_ELBOW, J.L_WRIST, J.L_HAND, LEFT, 0),
            (J.R_SHOULDER, J.R_ELBOW, J.R_WRIST, J.R_HAND, RIGHT, 1))
    for shoulder, elbow, wrist, hand, side, i in arms:
        p[shoulder] = (0.4 * side, -0.95, 0.0)
        p[elbow] = p[shoulder] + UPPER_ARM * _direction(pose.upper_arm[i], side)
        forearm = _direction(pose.forearm[i], side)
        p[wrist] = p[elbow] + FOREARM * forearm
        p[hand] = p[wrist] + HAND * forearm

    # 上身绕髋中心向前弯（头向 -z）
    c, s = np.cos(pose.bend), np.sin(pose.bend)
    upper = [J.SPINE, J.TORSO, J.NECK, J.HEAD,
             J.L_SHOULDER, J.L_ELBOW, J.L_WRIST, J.L_HAND,
             J.R_SHOULDER, J.R_ELBOW, J.R_WRIST, J.R_HAND]
    y, z = p[upper, 1].copy(), p[upper, 2].copy()
    p[upper, 1] = y * c - z * s
    p[upper, 2] = y * s + z * c

    legs = ((J.L_HIP, J.L_KNEE, J.L_ANKLE, J.L_FOOT, LEFT, 0),
            (J.R_HIP, J.R_KNEE, J.R_ANKLE, J.R_FOOT, RIGHT, 1))
    for hip, knee, ankle, foot, side, i in legs:
        p[hip] = (0.2 * side, 0.05, 0.0)
        thigh = _direction(pose.thigh[i], side)
        p[knee] = p[hip] + THIGH * thigh
        # 小腿在矢状面内相对大腿向后弯 knee 弧度
        angle = np.arctan2(-thigh[2], thigh[1]) - pose.knee[i]
        shin = np.array([thigh[0], np.cos(angle), -np.sin(angle)])
        p[ankle] = p[knee] + SHIN * shin / np.linalg.norm(shin)
        p[foot] = p[ankle] + (0.0, 0.0, -FOOT)

    ground = 0.05 + THIGH + SHIN
    p[:, 1] += ground - max(p[J.L_ANKLE, 1], p[J.R_ANKLE, 1])
    return p


@dataclass(frozen=True)
class Performance:
    """一个被试对一个动作的表演: 规范坐标骨架序列（米）"""
    action: str
    subject: int
    positions: np.ndarray  # (T, 21, 3)
    shift: Tuple[float, float]


def perform(action: str, subject: int, config: SynthConfig, seed: int) -> Performance:
    """生成表演；被试体型、速度与起始相位由 (seed, 动作, 被试) 决定"""
    rng = np.random.default_rng([seed, sorted(MOTIONS).index(action), subject])
    size = float(np.clip(1.0 + 0.06 * rng.standard_normal(), 0.85, 1.15))
    speed = float(rng.uniform(0.9, 1.1))
    start = float(rng.uniform(0.0, 0.1))
    shift = (float(rng.uniform(-4.0, 4.0)), float(rng.uniform(-2.0, 2.0)))
    motion = MOTIONS[action]

    frames = []
    for t in range(config.frames):
        phase = float(np.clip(start + speed * t / (config.frames - 1), 0.0, 1.0))
        joints = body_joints(motion(phase))
        if config.joint_noise > 0:
            joints = joints + config.joint_noise * rng.standard_normal(joints.shape)
        frames.append(joints * TORSO_METERS * size)
    return Performance(action=action, subject=subject, positions=np.stack(frames), shift=shift)


# ==================== 渲染 ====================

@dataclass(frozen=True, eq=False)
class RenderedSample:
    sample_id: str
    action: str
    subject: str
    camera: str
    view: float
    frames: Tuple[np.ndarray, ...]
    positions: np.ndarray  # (T, 21, 3) 摄像机坐标（米）
    joints2d: np.ndarray  # (T, 21, 2)
    boxes: Tuple[BoundingBox, ...]


def pixel_scale(config: SynthConfig) -> float:
    """像素 / 米"""
    return config.pixels_per_unit / TORSO_METERS


def image_center(config: SynthConfig, shift: Tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """髋中心的图像位置"""
    return np.array([config.width / 2.0 + shift[0], config.height * 0.55 + shift[1]])


def _box(points: np.ndarray, config: SynthConfig) -> BoundingBox:
    x0 = int(np.clip(np.floor(points[:, 0].min()) - BOX_MARGIN, 0, config.width - 1))
    y0 = int(np.clip(np.floor(points[:, 1].min()) - BOX_MARGIN, 0, config.height - 1))
    x1 = int(np.clip(np.ceil(points[:, 0].max()) + BOX_MARGIN, x0 + 1, config.width))
    y1 = int(np.clip(np.ceil(points[:, 1].max()) + BOX_MARGIN, y0 + 1, config.height))
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def draw_figure(joints2d: np.ndarray, config: SynthConfig) -> Image.Image:
    """画火柴人"""
    image = Image.new('L', (config.width, config.height), BACKGROUND)
    draw = ImageDraw.Draw(image)
    for a, b in BONES:
        draw.line([tuple(joints2d[a]), tuple(joints2d[b])], fill=FOREGROUND, width=LINE_WIDTH)
    hx, hy = joints2d[J.HEAD]
    draw.ellipse([hx - HEAD_RADIUS, hy - HEAD_RADIUS, hx + HEAD_RADIUS, hy + HEAD_RADIUS], fill=FOREGROUND)
    return image


def render(performance: Performance, view_degrees: float, config: SynthConfig, seed: int) -> RenderedSample:
    """从一个视角渲染表演"""
    theta = np.deg2rad(view_degrees)
    rotation = yaw_matrix(theta)
    k = pixel_scale(config)
    center = image_center(config, performance.shift)
    rng = np.random.default_rng([seed, sorted(MOTIONS).index(performance.action), performance.subject, int(round(view_degrees))])

    positions = performance.positions @ rotation.T
    joints2d = positions[:, :, :2] * k + center
    frames, boxes = [], []
    for t in range(len(positions)):
        pixels = np.asarray(draw_figure(joints2d[t], config), dtype=np.float64)
        if config.pixel_noise > 0:
            pixels = pixels + config.pixel_noise * rng.standard_normal(pixels.shape)
        frames.append(np.clip(np.round(pixels), 0, 255).astype(np.uint8))
        boxes.append(_box(joints2d[t], config))

    camera = f"view{int(round(view_degrees)):03d}"
    subject = f"s{performance.subject:02d}"
    return RenderedSample(
        sample_id=f"{performance.action}_{subject}_{camera}",
        action=performance.action,
        subject=subject,
        camera=camera,
        view=float(theta),
        frames=tuple(frames),
        positions=positions,
        joints2d=joints2d,
        boxes=tuple(boxes),
    )


def synthesize(config: Optional[SynthConfig] = None, seed: int = 0) -> List[RenderedSample]:
    """按 动作 x 被试 x 视角 的顺序生成全部样本"""
    config = config or SynthConfig()
    actions = list(MOTIONS)[:config.classes]
    samples = []
    for action in actions:
        for subject in range(config.subjects):
            performance = perform(action, subject, config, seed)
            for view in config.views:
                samples.append(render(performance, view, config, seed))
    logger.info(f"合成 {len(samples)} 个样本: {len(actions)} 个动作 x {config.subjects} 个被试 x {len(config.views)} 个视角")
    return samples


def to_video_sample(sample: RenderedSample) -> VideoSample:
    return VideoSample(
        sample_id=sample.sample_id,
        action=sample.action,
        subject=sample.subject,
        camera=sample.camera,
        frame_arrays=tuple(f.astype(np.float64) for f in sample.frames),
        skeletons=sequence_from_positions(sample.positions),
        boxes=sample.boxes,
        joints2d=sample.joints2d,
        environment='synthetic',
    )


def synthetic_dataset(config: Optional[SynthConfig] = None, seed: int = 0) -> Dataset:
    """内存中的合成数据集（不写磁盘）"""
    config = config or SynthConfig()
    samples = tuple(to_video_sample(s) for s in synthesize(config, seed))
    return Dataset(samples=samples, vocabulary=tuple(sorted(list(MOTIONS)[:config.classes])), source='synthetic')


# ==================== 写盘 ====================

def _format_row(values) -> str:
    return ' '.join(repr(float(v)) for v in values)


def write_sample(sample: RenderedSample, out_dir: Path) -> ManifestRecord:
    """写出一个样本的帧、骨架、包围盒与 2D 关节文件"""
    frames_dir = Path('frames') / sample.sample_id
    (out_dir / frames_dir).mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(sample.frames):
        Image.fromarray(frame).save(out_dir / frames_dir / f"{t:04d}.png")

    names = {kind: Path(kind) / f"{sample.sample_id}.txt" for kind in ('skeletons', 'bboxes', 'joints2d')}
    for path in names.values():
        (out_dir / path.parent).mkdir(parents=True, exist_ok=True)
    visible = np.ones((NUM_JOINTS, 1))
    (out_dir / names['skeletons']).write_text(
        ''.join(_format_row(np.hstack([p, visible]).ravel()) + '\n' for p in sample.positions), encoding='utf-8',
    )
    (out_dir / names['bboxes']).write_text(
        ''.join(f"{b.x} {b.y} {b.w} {b.h}\n" for b in sample.boxes), encoding='utf-8',
    )
    (out_dir / names['joints2d']).write_text(
        ''.join(_format_row(j.ravel()) + '\n' for j in sample.joints2d), encoding='utf-8',
    )
    return ManifestRecord(
        id=sample.sample_id,
        action=sample.action,
        subject=sample.subject,
        camera=sample.camera,
        frames_dir=str(frames_dir),
        skeleton_file=str(names['skeletons']),
        bbox_file=str(names['bboxes']),
        joints2d_file=str(names['joints2d']),
        environment='synthetic',
    )


def write_corpus(out_dir: Union[str, Path], config: Optional[SynthConfig] = None, seed: int = 0) -> Path:
    """
    渲染并写出合成语料，返回清单路径

    Raises:
        IngestionError: 输出目录不可写
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        records = [write_sample(sample, out_dir) for sample in synthesize(config, seed)]
        manifest = out_dir / 'manifest.jsonl'
        manifest.write_text(
            ''.join(json.dumps(r.model_dump(exclude_none=True), sort_keys=True) + '\n' for r in records),
            encoding='utf-8',
        )
    except OSError as e:
        raise IngestionError(f"无法写出合成数据 ({e})", path=str(out_dir))
    logger.info(f"合成语料已写入 {manifest}")
    return manifest
