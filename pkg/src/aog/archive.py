"""
模型归档读写

归档目录:
    index.json  - 排序键的 JSON 索引（特征配置、部件定义、姿态 / 动作表、数组位置）
    weights.bin - 小端 float32 模板与动作权重，按索引中的 {offset, shape} 读取

模板与动作权重在写入前应已四舍五入到 float32（见 round_templates / round_action），保证读写往返完全一致。
"""

import json
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..core.data_models import PartDefinition
from ..core.errors import IngestionError
from ..geometry import OffsetGaussian3D, ProjectionParams
from ..schemas.archive_schemas import (
    ARCHIVE_FORMAT_VERSION,
    ActionRecord,
    ArchiveIndex,
    ArrayRecord,
    OffsetRecord,
    PartRecord,
    PoseRecord,
)
from .nodes import ActionModel, ModelArchive, PartModel, PoseModel


logger = logging.getLogger(__name__)

INDEX_FILE = 'index.json'
WEIGHTS_FILE = 'weights.bin'
_DTYPE = np.dtype('<f4')


def to_float32(array: np.ndarray) -> np.ndarray:
    """四舍五入到 float32 精度（仍以 float64 保存）"""
    return np.asarray(array, dtype=np.float64).astype(_DTYPE).astype(np.float64)


def round_templates(pose: PoseModel) -> PoseModel:
    """把所有部件模板四舍五入到 float32，定稿姿态模型时调用"""
    def _round(part: PartModel) -> PartModel:
        return replace(
            part,
            app_templates=to_float32(part.app_templates),
            mot_templates=to_float32(part.mot_templates),
        )
    return replace(pose, root=_round(pose.root), children=tuple(_round(c) for c in pose.children))


def round_action(action: ActionModel) -> ActionModel:
    """把动作权重四舍五入到 float32，与从 weights.bin 读回的结果一致"""
    return replace(action, weights=to_float32(action.weights))


class _ArrayWriter:
    def __init__(self):
        self.records: Dict[str, ArrayRecord] = {}
        self.chunks: List[np.ndarray] = []
        self.offset = 0

    def add(self, key: str, array: np.ndarray) -> str:
        data = np.ascontiguousarray(array, dtype=_DTYPE)
        self.records[key] = ArrayRecord(offset=self.offset, shape=list(data.shape))
        self.chunks.append(data.ravel())
        self.offset += data.size
        return key

    def tobytes(self) -> bytes:
        if not self.chunks:
            return b''
        return np.concatenate(self.chunks).tobytes()


def _pose_record(pose: PoseModel, writer: _ArrayWriter) -> PoseRecord:
    templates = {}
    for part in pose.parts:
        key = f"pose/{pose.pose_id}/part{part.part_id}"
        stacked = np.concatenate([part.app_templates, part.mot_templates], axis=3)
        templates[str(part.part_id)] = writer.add(key, stacked)
    part_window = list(pose.children[0].window) if pose.children else list(pose.root.window)
    return PoseRecord(
        pose_id=pose.pose_id,
        label=pose.label,
        items=list(pose.items),
        part_ids=[p.part_id for p in pose.parts],
        root_window=list(pose.root.window),
        part_window=part_window,
        view_centers=[float(c) for c in pose.view_centers],
        share_views=pose.share_views,
        model_scale=float(pose.model_scale),
        eigen_floor=float(pose.eigen_floor),
        bias=float(pose.bias),
        offsets=[
            OffsetRecord(
                part_id=child.part_id,
                mean=[float(v) for v in child.offset.mean],
                variances=[float(v) for v in child.offset.variances],
            )
            for child in pose.children
        ],
        bin_means=None if pose.bin_means is None else pose.bin_means.tolist(),
        projections={camera: params.to_dict() for camera, params in pose.projections.items()},
        discrimination=float(pose.discrimination),
        validation_ap=pose.validation_ap,
        response_mean=float(pose.response_mean),
        response_std=float(pose.response_std),
        templates=templates,
    )


def save_archive(archive: ModelArchive, directory: Union[str, Path]) -> Path:
    """
    写入模型归档

    Returns:
        归档目录路径
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    writer = _ArrayWriter()

    poses = [_pose_record(pose, writer) for pose in archive.poses.values()]
    actions = [
        ActionRecord(
            label=action.label,
            pose_ids=list(action.pose_ids),
            num_lowres=action.num_lowres,
            bias=float(action.bias),
            weights=writer.add(f"action/{action.label}", action.weights),
        )
        for action in archive.actions.values()
    ]
    index = ArchiveIndex(
        format_version=ARCHIVE_FORMAT_VERSION,
        vocabulary=list(archive.vocabulary),
        features=archive.feature_config,
        model=archive.model_config,
        parts=[PartRecord(**part.to_dict()) for part in archive.parts],
        poses=poses,
        actions=actions,
        arrays=writer.records,
    )

    payload = json.dumps(index.model_dump(mode='json'), sort_keys=True, indent=2, ensure_ascii=False)
    _write_atomic(directory / INDEX_FILE, (payload + '\n').encode('utf-8'))
    _write_atomic(directory / WEIGHTS_FILE, writer.tobytes())
    logger.info(
        f"模型归档已写入 {directory}: {len(poses)} 个姿态, {len(actions)} 个动作, "
        f"{writer.offset} 个权重"
    )
    return directory


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + '.tmp')
    with open(tmp, 'wb') as handle:
        handle.write(data)
    os.replace(tmp, path)


def _read_index(directory: Path) -> ArchiveIndex:
    path = directory / INDEX_FILE
    if not path.is_file():
        raise IngestionError("模型归档缺少索引文件", path=str(path))
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise IngestionError(f"索引文件不是合法 JSON: {e}", path=str(path))
    version = raw.get('format_version') if isinstance(raw, dict) else None
    if version != ARCHIVE_FORMAT_VERSION:
        raise IngestionError(f"不支持的归档格式版本: {version}", path=str(path))
    try:
        return ArchiveIndex.model_validate(raw)
    except ValidationError as e:
        raise IngestionError(f"索引文件结构错误: {e}", path=str(path))


def _array_reader(directory: Path, index: ArchiveIndex):
    path = directory / WEIGHTS_FILE
    if not path.is_file():
        raise IngestionError("模型归档缺少权重文件", path=str(path))
    flat = np.frombuffer(path.read_bytes(), dtype=_DTYPE)

    def read(key: str) -> np.ndarray:
        record = index.arrays.get(key)
        if record is None:
            raise IngestionError(f"索引中没有数组 {key}", path=str(path))
        size = int(np.prod(record.shape)) if record.shape else 1
        if record.offset + size > flat.size:
            raise IngestionError(f"数组 {key} 超出权重文件长度 {flat.size}", path=str(path))
        return flat[record.offset:record.offset + size].astype(np.float64).reshape(record.shape)

    return read


def _part_from_array(part_id: int, window, stacked: np.ndarray, app_dim: int, offset=None) -> PartModel:
    return PartModel(
        part_id=part_id,
        window=tuple(window),
        app_templates=stacked[..., :app_dim],
        mot_templates=stacked[..., app_dim:],
        offset=offset,
    )


def _pose_from_record(record: PoseRecord, read, app_dim: int) -> PoseModel:
    offsets = {o.part_id: OffsetGaussian3D(mean=o.mean, cov=o.variances) for o in record.offsets}
    root_id, child_ids = record.part_ids[0], record.part_ids[1:]
    root = _part_from_array(root_id, record.root_window, read(record.templates[str(root_id)]), app_dim)
    children = tuple(
        _part_from_array(
            pid, record.part_window, read(record.templates[str(pid)]), app_dim, offsets[pid],
        )
        for pid in child_ids
    )
    return PoseModel(
        pose_id=record.pose_id,
        label=record.label,
        root=root,
        children=children,
        view_centers=np.asarray(record.view_centers),
        model_scale=record.model_scale,
        bias=record.bias,
        share_views=record.share_views,
        items=tuple(record.items),
        bin_means=None if record.bin_means is None else np.asarray(record.bin_means),
        projections={k: ProjectionParams.from_dict(v) for k, v in record.projections.items()},
        eigen_floor=record.eigen_floor,
        response_mean=record.response_mean,
        response_std=record.response_std,
        discrimination=record.discrimination,
        validation_ap=record.validation_ap,
    )


def load_archive(directory: Union[str, Path]) -> ModelArchive:
    """
    读取模型归档

    Raises:
        IngestionError: 文件缺失、版本不符或内容损坏
    """
    directory = Path(directory)
    index = _read_index(directory)
    read = _array_reader(directory, index)
    app_dim = 4 * index.features.hog_bins

    try:
        poses = {
            record.pose_id: _pose_from_record(record, read, app_dim)
            for record in index.poses
        }
        actions = {
            record.label: ActionModel(
                label=record.label,
                pose_ids=tuple(record.pose_ids),
                num_lowres=record.num_lowres,
                weights=read(record.weights),
                bias=record.bias,
            )
            for record in index.actions
        }
        archive = ModelArchive(
            vocabulary=tuple(index.vocabulary),
            feature_config=index.features,
            model_config=index.model,
            parts=tuple(PartDefinition.from_dict(p.model_dump()) for p in index.parts),
            poses=poses,
            actions=actions,
        )
    except KeyError as e:
        raise IngestionError(f"归档索引引用了缺失的条目: {e}", path=str(directory / INDEX_FILE))
    logger.info(f"已加载模型归档 {directory}: {archive.summary()}")
    return archive


def archive_digest(directory: Union[str, Path]) -> Tuple[int, int]:
    """(索引字节数, 权重字节数)，用于日志与运行记录"""
    directory = Path(directory)
    return (directory / INDEX_FILE).stat().st_size, (directory / WEIGHTS_FILE).stat().st_size
