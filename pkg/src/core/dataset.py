"""
数据集读取 - 清单、骨架文件、包围盒与 2D 关节

清单为 JSON Lines，每行一条 ManifestRecord，相对路径相对清单所在目录解析。
骨架文件每行一帧: 21 x (x y z v)，v 为可见性位 (0/1)。
包围盒文件每行一帧: x y w h。
2D 关节文件每行一帧: 21 x (u v)。
帧图像在访问时才解码。
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from ..schemas.manifest_schemas import ManifestRecord
from .data_models import (
    NUM_JOINTS,
    BoundingBox,
    Dataset,
    FrameReader,
    Skeleton3D,
    VideoSample,
    sequence_from_positions,
)
from .errors import IngestionError, SkeletonParseError


logger = logging.getLogger(__name__)


def _parse_numeric_lines(path: Path, width: int, what: str) -> np.ndarray:
    """读取每行固定数量浮点数的文本文件，返回 (行数, width) 数组"""
    if not path.is_file():
        raise IngestionError(f"{what}文件不存在", path=str(path))

    rows: List[List[float]] = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith('#'):
                continue
            tokens = text.split()
            if len(tokens) != width:
                raise SkeletonParseError(
                    f"{what}记录应包含 {width} 个数值, 实际 {len(tokens)} 个",
                    path=str(path),
                    line_number=line_number,
                )
            try:
                values = [float(t) for t in tokens]
            except ValueError:
                raise SkeletonParseError(f"{what}记录包含非数值字段", path=str(path), line_number=line_number)
            if not np.all(np.isfinite(values)):
                raise SkeletonParseError(f"{what}记录包含非有限数值", path=str(path), line_number=line_number)
            rows.append(values)

    if not rows:
        raise IngestionError(f"{what}文件为空", path=str(path))
    return np.asarray(rows, dtype=np.float64)


def read_skeleton_file(path: Path) -> Tuple[Skeleton3D, ...]:
    """
    读取骨架文件

    Raises:
        SkeletonParseError: 字段数量错误、非数值或可见性位不是 0/1
    """
    path = Path(path)
    table = _parse_numeric_lines(path, NUM_JOINTS * 4, "骨架")
    table = table.reshape(-1, NUM_JOINTS, 4)
    flags = table[:, :, 3]
    bad = np.nonzero(~np.isin(flags, (0.0, 1.0)))[0]
    if bad.size:
        raise SkeletonParseError("可见性位必须为 0 或 1", path=str(path), line_number=int(bad[0]) + 1)
    return sequence_from_positions(table[:, :, :3], flags.astype(bool))


def read_bbox_file(path: Path) -> Tuple[BoundingBox, ...]:
    path = Path(path)
    table = _parse_numeric_lines(path, 4, "包围盒")
    return tuple(BoundingBox(*(int(round(v)) for v in row)) for row in table)


def read_joints2d_file(path: Path) -> np.ndarray:
    """读取 2D 关节文件，返回 (T, 21, 2)"""
    path = Path(path)
    table = _parse_numeric_lines(path, NUM_JOINTS * 2, "2D 关节")
    return table.reshape(-1, NUM_JOINTS, 2)


def _check_aligned(sample_id: str, name: str, length: int, num_frames: int, path: Path) -> None:
    if length != num_frames:
        raise IngestionError(
            f"样本 {sample_id} 的{name}长度 ({length}) 与帧数 ({num_frames}) 不一致",
            path=str(path),
        )


def load_sample(record: ManifestRecord, base_dir: Path) -> VideoSample:
    """按清单记录构造视频样本"""
    reader = FrameReader(base_dir / record.frames_dir)
    num_frames = len(reader)

    skeletons = None
    if record.skeleton_file:
        path = base_dir / record.skeleton_file
        skeletons = read_skeleton_file(path)
        _check_aligned(record.id, "骨架序列", len(skeletons), num_frames, path)

    boxes = None
    if record.bbox_file:
        path = base_dir / record.bbox_file
        boxes = read_bbox_file(path)
        _check_aligned(record.id, "包围盒序列", len(boxes), num_frames, path)

    joints2d = None
    if record.joints2d_file:
        path = base_dir / record.joints2d_file
        joints2d = read_joints2d_file(path)
        _check_aligned(record.id, "2D 关节序列", len(joints2d), num_frames, path)

    return VideoSample(
        sample_id=record.id,
        action=record.action,
        subject=record.subject,
        camera=record.camera,
        reader=reader,
        skeletons=skeletons,
        boxes=boxes,
        joints2d=joints2d,
        environment=record.environment,
    )


def read_manifest(manifest: Path) -> List[ManifestRecord]:
    """读取 JSON Lines 清单"""
    manifest = Path(manifest)
    if not manifest.is_file():
        raise IngestionError("清单文件不存在", path=str(manifest))

    records: List[ManifestRecord] = []
    seen = set()
    with open(manifest, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                record = ManifestRecord.model_validate(json.loads(text))
            except (ValueError, ValidationError) as e:
                raise IngestionError(
                    f"清单记录格式错误 ({manifest}, line {line_number})",
                    path=str(manifest),
                    details=str(e),
                )
            if record.id in seen:
                raise IngestionError(
                    f"清单中样本 ID 重复: {record.id} ({manifest}, line {line_number})",
                    path=str(manifest),
                )
            seen.add(record.id)
            records.append(record)
    return records


def load_dataset(manifest: str, vocabulary: Optional[Tuple[str, ...]] = None) -> Dataset:
    """
    读取清单并构造数据集

    Args:
        manifest: 清单路径
        vocabulary: 指定动作词表（默认取清单中出现的动作，按字典序）

    Returns:
        完整索引的 Dataset，帧在访问时解码

    Raises:
        IngestionError: 文件缺失（消息中包含路径）
        SkeletonParseError: 骨架记录格式错误（包含行号）
    """
    manifest_path = Path(manifest)
    records = read_manifest(manifest_path)
    base_dir = manifest_path.parent

    samples = tuple(load_sample(record, base_dir) for record in records)
    if vocabulary is None:
        vocabulary = tuple(sorted({s.action for s in samples}))

    dataset = Dataset(
        samples=samples,
        vocabulary=tuple(vocabulary),
        source=str(manifest_path),
    )
    logger.info(
        "loaded %d samples from %s (%d actions)",
        len(samples), manifest_path, len(dataset.vocabulary),
    )
    return dataset
