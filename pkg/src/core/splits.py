"""
实验划分协议

- cross-subject: 留出一个或多个被试的样本作为测试集
- cross-view: 留出一个或多个摄像机的样本作为测试集
- cross-environment: 训练集与测试集来自两个清单
"""

import logging
from typing import Optional, Sequence, Tuple, Union

from .data_models import Dataset, SplitProtocol
from .errors import ConfigurationError


logger = logging.getLogger(__name__)

_GROUPING_ATTRIBUTE = {
    SplitProtocol.CROSS_SUBJECT: 'subject',
    SplitProtocol.CROSS_VIEW: 'camera',
}


def _as_protocol(protocol: Union[str, SplitProtocol]) -> SplitProtocol:
    try:
        return SplitProtocol(protocol)
    except ValueError:
        choices = ', '.join(p.value for p in SplitProtocol)
        raise ConfigurationError(f"未知的划分协议 '{protocol}'，可选: {choices}")


def split_dataset(
    dataset: Dataset,
    protocol: Union[str, SplitProtocol],
    holdout: Optional[Sequence[str]] = None,
    test_dataset: Optional[Dataset] = None,
) -> Tuple[Dataset, Dataset]:
    """
    按协议划分训练集与测试集

    Args:
        dataset: 完整数据集（跨环境协议下为训练清单）
        protocol: 划分协议
        holdout: 留出的被试 / 摄像机 ID 列表，默认取字典序最后一个
        test_dataset: 跨环境协议的测试数据集

    Returns:
        (train, test)

    Raises:
        ConfigurationError: 协议未知、样本缺少分组属性、留出 ID 不存在或缺少测试清单
    """
    protocol = _as_protocol(protocol)

    if protocol is SplitProtocol.CROSS_ENVIRONMENT:
        if test_dataset is None:
            raise ConfigurationError("cross-environment 协议需要第二个清单作为测试集")
        if tuple(test_dataset.vocabulary) != tuple(dataset.vocabulary):
            missing = sorted(set(test_dataset.vocabulary) - set(dataset.vocabulary))
            if missing:
                raise ConfigurationError(f"测试清单包含训练词表之外的动作: {missing}")
        train = dataset.subset(dataset.samples, protocol=protocol.value)
        test = dataset.subset(test_dataset.samples, protocol=protocol.value)
        return train, test

    attribute = _GROUPING_ATTRIBUTE[protocol]
    if not dataset.samples:
        empty = dataset.subset((), protocol=protocol.value)
        return empty, empty

    missing = [s.sample_id for s in dataset.samples if getattr(s, attribute) is None]
    if missing:
        raise ConfigurationError(
            f"{protocol.value} 协议要求所有样本带有 {attribute} 属性，缺失: {missing[:5]}"
        )

    groups = sorted({getattr(s, attribute) for s in dataset.samples})
    held = list(holdout) if holdout else [groups[-1]]
    unknown = sorted(set(held) - set(groups))
    if unknown:
        raise ConfigurationError(f"留出的 {attribute} 不存在: {unknown}，可选: {groups}")

    held_set = set(held)
    train = [s for s in dataset.samples if getattr(s, attribute) not in held_set]
    test = [s for s in dataset.samples if getattr(s, attribute) in held_set]
    logger.info(
        "%s split: holdout %s=%s, train=%d, test=%d",
        protocol.value, attribute, held, len(train), len(test),
    )
    return (
        dataset.subset(train, protocol=protocol.value),
        dataset.subset(test, protocol=protocol.value),
    )
