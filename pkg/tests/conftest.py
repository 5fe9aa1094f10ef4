"""
测试公共夹具

合成语料用很小的配置（少量动作、被试、视角与帧），保证单元测试在秒级完成。
端到端测试标记为 slow。
"""

import numpy as np
import pytest

from src.cli.synth import BodyPose, body_joints, synthesize, synthetic_dataset
from src.core.config import get_config
from src.core.output_formatter import OutputFormatter
from src.db import close_db
from src.runner import StageRunner
from src.schemas.config_schemas import RunConfig, SynthConfig


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: 端到端训练测试（分钟级）')


@pytest.fixture(autouse=True)
def reset_singletons():
    """每个测试结束后复位配置、运行管理器与输出开关"""
    yield
    get_config().reset()
    runner = StageRunner.get_instance()
    runner.shutdown()
    runner.events = None
    runner.registry_enabled = False
    close_db()
    OutputFormatter.PRINT_ENABLED = False
    OutputFormatter.set_current_stage(None)


@pytest.fixture
def standing_joints() -> np.ndarray:
    """站立姿态的规范坐标骨架 (21, 3)，髋中心在原点，躯干长度为 1"""
    return body_joints(BodyPose())


@pytest.fixture
def tiny_synth() -> SynthConfig:
    return SynthConfig(classes=2, views=[0.0, 90.0], subjects=2, frames=6)


@pytest.fixture
def tiny_rendered(tiny_synth):
    return synthesize(tiny_synth, seed=0)


@pytest.fixture
def tiny_dataset(tiny_synth):
    return synthetic_dataset(tiny_synth, seed=0)


@pytest.fixture
def fast_config(tmp_path) -> RunConfig:
    """缩小搜索范围与迭代次数的运行配置"""
    return RunConfig.model_validate({
        'features': {'num_scales': 2, 'flow_iterations': 10, 'flow_levels': 1},
        'model': {'num_view_bins': 4},
        'mining': {'frame_stride': 2, 'max_examples_per_part': 60, 'cluster_floor': 3},
        'training': {
            'num_negatives': 200,
            'bootstrap_rounds': 1,
            'latent_iterations': 2,
            'epochs': 3,
            'negative_frames': 8,
            'action_epochs': 100,
        },
        'registry': {'enabled': False},
        'runtime': {'workdir': str(tmp_path / 'runs')},
    })


@pytest.fixture
def make_pose():
    """
    随机模板的小姿态模型工厂

    根部件 2x2 窗口，子部件 1x1 窗口；外观维度 app_dim、运动维度 mot_dim。
    """
    from src.aog import PartModel, PoseModel, view_bin_centers
    from src.geometry import OffsetGaussian3D

    def build(
        pose_id='pose',
        label='walk',
        num_bins=4,
        app_dim=8,
        mot_dim=4,
        offsets=((0.0, 1.0, 0.0), (1.0, 0.0, 0.5)),
        seed=0,
        **kwargs,
    ):
        rng = np.random.default_rng(seed)

        def part(part_id, window, offset=None):
            h, w = window
            return PartModel(
                part_id=part_id,
                window=window,
                app_templates=rng.normal(size=(num_bins, h, w, app_dim)),
                mot_templates=rng.normal(size=(num_bins, h, w, mot_dim)),
                offset=offset,
            )

        children = tuple(
            part(i + 1, (1, 1), OffsetGaussian3D.isotropic(mean, 0.7))
            for i, mean in enumerate(offsets)
        )
        return PoseModel(
            pose_id=pose_id,
            label=label,
            root=part(0, (2, 2)),
            children=children,
            view_centers=view_bin_centers(num_bins),
            model_scale=1.5,
            **kwargs,
        )

    return build
