"""
命令行入口

子命令:
    ingest  读取清单并写出数据集索引
    synth   渲染合成火柴人语料
    mine    在训练划分上挖掘姿态（--dump-poses 写出姿态表）
    train   训练完整模型并写出模型归档
    infer   对清单中的每段视频分类
    eval    在测试划分上评估（混淆矩阵、得分表、准确率汇总）

每个子命令读取一个配置文件（--config）并接受 --set section.key=value、--seed、--jobs 覆盖。
退出码: 0 成功，1 用法 / 配置错误，2 数据错误，3 数值失败。
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aog import ModelArchive, archive_digest, load_archive, save_archive
from ..core.config import setup_config
from ..core.data_models import Dataset
from ..core.dataset import load_dataset
from ..core.errors import MstAogError, NumericError, UsageError
from ..core.output_formatter import OutputFormatter
from ..core.splits import split_dataset
from ..features import FeatureCache
from ..inference import Classification, classify
from ..learning import mine_stage, train_pipeline
from ..mining import pose_table_rows
from ..runner import StageRunner
from ..schemas.config_schemas import RunConfig
from ..schemas.manifest_schemas import DatasetIndex
from ..streaming.event_log import EventLog
from .evaluation import check_vocabulary, evaluation_report, write_predictions
from .synth import write_corpus


logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """参数错误抛出 UsageError（退出码 1），而不是 argparse 默认的退出码 2"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='mstaog', description='多视角时空与或图动作识别流水线')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='扁平 section.key = value 配置文件')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help='覆盖配置项，可重复')
    common.add_argument('--seed', type=int, help='随机种子')
    common.add_argument('--jobs', type=int, help='工作线程数（默认 CPU 核数）')
    common.add_argument('--events', help='事件日志路径（默认 <workdir>/events.jsonl）')
    common.add_argument('--log-level', help='日志级别（默认取 runtime.log_level）')
    common.add_argument('--quiet', action='store_true', help='不输出阶段横幅')

    commands = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    ingest = commands.add_parser('ingest', parents=[common], help='读取清单并写出数据集索引')
    ingest.add_argument('--manifest', required=True)
    ingest.add_argument('--out', help='索引 JSON（默认 <workdir>/dataset_index.json）')

    synth = commands.add_parser('synth', parents=[common], help='渲染合成语料')
    synth.add_argument('--out', required=True, help='输出目录')

    mine = commands.add_parser('mine', parents=[common], help='挖掘姿态')
    mine.add_argument('--manifest', required=True)
    mine.add_argument('--test-manifest', help='跨环境协议的测试清单')
    mine.add_argument('--out', help='姿态 JSON（默认 <workdir>/poses.json）')
    mine.add_argument('--dump-poses', help='写出姿态表 CSV')

    train = commands.add_parser('train', parents=[common], help='训练模型')
    train.add_argument('--manifest', required=True)
    train.add_argument('--test-manifest', help='跨环境协议的测试清单')
    train.add_argument('--out', help='模型归档目录（默认 <workdir>/model）')

    infer = commands.add_parser('infer', parents=[common], help='对视频分类')
    infer.add_argument('--archive', required=True)
    infer.add_argument('--manifest', required=True)
    infer.add_argument('--out', help='预测 JSONL（默认 <workdir>/predictions.jsonl）')

    evaluate = commands.add_parser('eval', parents=[common], help='在测试划分上评估')
    evaluate.add_argument('--archive', required=True)
    evaluate.add_argument('--manifest', required=True)
    evaluate.add_argument('--test-manifest', help='跨环境协议的测试清单')
    evaluate.add_argument('--out', help='报告目录（默认 <workdir>/eval）')
    return parser


# ==================== 公共步骤 ====================

def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode('utf-8')).hexdigest()


def _workdir(config: RunConfig) -> Path:
    path = Path(config.runtime.workdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _output(value: Optional[str], config: RunConfig, default: str) -> Path:
    return Path(value) if value else _workdir(config) / default


def _split(args, config: RunConfig) -> Tuple[Dataset, Dataset]:
    dataset = load_dataset(args.manifest)
    test_manifest = getattr(args, 'test_manifest', None) or config.protocol.test_manifest
    test_dataset = load_dataset(test_manifest, dataset.vocabulary) if test_manifest else None
    return split_dataset(dataset, config.protocol.name, config.protocol.holdout or None, test_dataset)


def classify_videos(
    dataset: Dataset,
    archive: ModelArchive,
    config: RunConfig,
    runner: StageRunner,
) -> List[Classification]:
    """逐视频分类，按样本顺序返回；每段视频处理完即释放其帧特征"""
    cache = FeatureCache(archive.feature_config, config.runtime.cache_frames)

    def run(sample):
        try:
            return classify(sample, archive, cache, config.inference, runner.map_ordered)
        finally:
            cache.evict(sample.sample_id)

    return runner.map_ordered(run, list(dataset.samples))


# ==================== 子命令 ====================

def cmd_ingest(args, config: RunConfig, runner: StageRunner) -> Dict:
    dataset = load_dataset(args.manifest)
    index = DatasetIndex(
        manifest=str(args.manifest),
        num_samples=len(dataset),
        vocabulary=list(dataset.vocabulary),
        subjects=sorted({s.subject for s in dataset.samples if s.subject}),
        cameras=sorted({s.camera for s in dataset.samples if s.camera}),
        protocol=config.protocol.name,
    )
    out = _output(args.out, config, 'dataset_index.json')
    out.write_text(json.dumps(index.model_dump(), indent=2, sort_keys=True), encoding='utf-8')
    return {'samples': len(dataset), 'actions': len(dataset.vocabulary), 'out': str(out)}


def cmd_synth(args, config: RunConfig, runner: StageRunner) -> Dict:
    manifest = write_corpus(args.out, config.synth, config.runtime.seed)
    return {'manifest': str(manifest)}


def cmd_mine(args, config: RunConfig, runner: StageRunner) -> Dict:
    train, _ = _split(args, config)
    rng = np.random.default_rng(config.runtime.seed)
    poses, mined = mine_stage(train, config, rng, events=runner.events)
    rows = pose_table_rows(poses, train.vocabulary)

    out = _output(args.out, config, 'poses.json')
    out.write_text(json.dumps({'mined': mined, 'poses': rows}, indent=2, sort_keys=True), encoding='utf-8')
    if args.dump_poses:
        with open(args.dump_poses, 'w', newline='', encoding='utf-8') as handle:
            fields = list(rows[0]) if rows else ['label', 'pose_id', 'items']
            writer = csv.DictWriter(handle, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
        OutputFormatter.print_table(
            '姿态表',
            ['label', 'pose_id', 'items'],
            [[r['label'], r['pose_id'], r['items']] for r in rows],
        )
    return {'poses': len(rows), 'out': str(out)}


def cmd_train(args, config: RunConfig, runner: StageRunner) -> Dict:
    train, _ = _split(args, config)
    archive, report = train_pipeline(
        train,
        config,
        FeatureCache(config.features, config.runtime.cache_frames),
        mapper=runner.map_ordered,
        events=runner.events,
    )
    out = save_archive(archive, _output(args.out, config, 'model'))
    report_path = _workdir(config) / 'training_report.json'
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=float), encoding='utf-8')
    index_bytes, weight_bytes = archive_digest(out)
    return {
        'poses': len(archive.poses),
        'actions': len(archive.actions),
        'index_bytes': index_bytes,
        'weight_bytes': weight_bytes,
        'out': str(out),
    }


def cmd_infer(args, config: RunConfig, runner: StageRunner) -> Dict:
    archive = load_archive(args.archive)
    dataset = load_dataset(args.manifest)
    results = classify_videos(dataset, archive, config, runner)
    out = write_predictions(_output(args.out, config, 'predictions.jsonl'), results)
    for result in results:
        OutputFormatter.print_step(f"{result.sample_id}: {result.label} (view bin {result.view_bin})")
    return {'videos': len(results), 'out': str(out)}


def cmd_eval(args, config: RunConfig, runner: StageRunner) -> Dict:
    archive = load_archive(args.archive)
    _, test = _split(args, config)
    check_vocabulary(archive.vocabulary, [s.action for s in test.samples])
    results = classify_videos(test, archive, config, runner)
    summary = evaluation_report(
        _output(args.out, config, 'eval'),
        results,
        [s.action for s in test.samples],
        archive.vocabulary,
        [s.camera for s in test.samples],
    )
    OutputFormatter.print_summary('评估', {'videos': summary['num_videos'], 'accuracy': summary['accuracy']})
    return {'videos': summary['num_videos'], 'accuracy': summary['accuracy']}


COMMANDS: Dict[str, Callable] = {
    'ingest': cmd_ingest,
    'synth': cmd_synth,
    'mine': cmd_mine,
    'train': cmd_train,
    'infer': cmd_infer,
    'eval': cmd_eval,
}


# ==================== 入口 ====================

def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """运行一个子命令并返回退出码"""
    runner = None
    try:
        args = build_parser().parse_args(argv)
        config = setup_config(args.config, args.overrides, args.seed, args.jobs).run_config
        _setup_logging(args.log_level or config.runtime.log_level)
        OutputFormatter.PRINT_ENABLED = not args.quiet

        events = EventLog(args.events or _workdir(config) / 'events.jsonl')
        runner = StageRunner.get_instance().configure(
            jobs=config.runtime.jobs or os.cpu_count() or 1,
            events=events,
            registry_url=config.registry.url,
            registry_enabled=config.registry.enabled,
            workdir=config.runtime.workdir,
            config_digest=config_digest(config),
        )

        OutputFormatter.print_stage_start(args.command, {'seed': config.runtime.seed, 'jobs': runner.jobs})
        with runner.run_stage(args.command) as stats:
            stats.update(COMMANDS[args.command](args, config, runner))
        OutputFormatter.print_stage_complete(args.command, stats)
        return 0

    except MstAogError as e:
        OutputFormatter.print_error(e.message, e.details)
        logger.debug("命令失败", exc_info=True)
        return e.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as e:
        OutputFormatter.print_error(f"数值失败: {e}")
        logger.error("数值失败", exc_info=True)
        return NumericError.exit_code
    finally:
        if runner is not None:
            runner.shutdown()


if __name__ == '__main__':
    sys.exit(main())
