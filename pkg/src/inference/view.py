"""
视角估计
"""

from collections import Counter
from typing import Optional, Sequence

from ..core.errors import EmptyInputError
from .detection import Detection


def estimate_view(detections: Sequence[Detection]) -> int:
    """
    得分最高的检测所在的视角 bin，得分相同时取较小的 bin

    Raises:
        EmptyInputError: 检测列表为空
    """
    if not detections:
        raise EmptyInputError("视角估计需要至少一个检测结果")
    best = min(detections, key=lambda d: (-d.score, d.view_bin))
    return best.view_bin


def majority_view(bins: Sequence[int]) -> Optional[int]:
    """多数票视角 bin，票数相同时取较小的 bin；空序列返回 None"""
    if not bins:
        return None
    counts = Counter(int(b) for b in bins)
    return min(counts, key=lambda b: (-counts[b], b))
