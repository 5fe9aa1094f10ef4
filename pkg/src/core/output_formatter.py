"""
输出格式化模块 - 统一管理命令行输出格式

提供一致的输出格式和样式，便于维护和修改。
输出标签格式:
- [ingest] / [train] / ... - 命令行阶段
- [train > mine] - 阶段内部步骤
"""

from typing import Any, Dict, Mapping, Optional, Sequence


class OutputFormatter:
    """输出格式化器 - 统一管理所有输出样式"""

    # 全局开关：是否启用 print 输出（库调用与测试默认关闭，CLI 打开）
    PRINT_ENABLED = False

    # 分隔符长度
    SEPARATOR_LENGTH = 70

    # 分隔符样式
    SEPARATOR_STAGE = "="
    SEPARATOR_SECTION = "-"

    # 当前阶段（用于标注输出来源）
    _current_stage: Optional[str] = None

    @classmethod
    def set_current_stage(cls, stage: Optional[str]):
        """设置当前阶段上下文"""
        cls._current_stage = stage

    @staticmethod
    def format_stage_label(stage: Optional[str] = None, step: Optional[str] = None) -> str:
        """
        格式化来源标签

        Args:
            stage: 阶段名，缺省时使用当前阶段上下文
            step: 阶段内部步骤名
        """
        stage = stage or OutputFormatter._current_stage
        if stage and step:
            return f"[{stage} > {step}]"
        if stage:
            return f"[{stage}]"
        return f"[{step}]" if step else ""

    @staticmethod
    def format_value(value: Any) -> str:
        """浮点数保留 4 位有效数字，其余原样输出"""
        if isinstance(value, float):
            return f"{value:.4g}"
        return str(value)

    @staticmethod
    def _truncate_text(text: str, max_length: int = 100) -> str:
        """截断文本"""
        if len(text) > max_length:
            return f"{text[:max_length]}..."
        return text

    # ========================================================================
    # 阶段输出
    # ========================================================================

    @staticmethod
    def print_stage_start(stage: str, details: Optional[Mapping[str, Any]] = None):
        """打印阶段开始横幅"""
        # 设置当前阶段上下文（不受 PRINT_ENABLED 影响）
        OutputFormatter.set_current_stage(stage)
        if not OutputFormatter.PRINT_ENABLED:
            return
        line = OutputFormatter.SEPARATOR_STAGE * OutputFormatter.SEPARATOR_LENGTH
        print(f"\n{line}")
        print(f"{OutputFormatter.format_stage_label(stage)} 开始")
        print(line)
        for key, value in (details or {}).items():
            print(f"  {key}: {OutputFormatter._truncate_text(OutputFormatter.format_value(value))}")

    @staticmethod
    def print_step(message: str, step: Optional[str] = None):
        """打印阶段内的进度行"""
        if not OutputFormatter.PRINT_ENABLED:
            return
        print(f"{OutputFormatter.format_stage_label(step=step)} {message}")

    @staticmethod
    def print_stage_complete(stage: str, stats: Optional[Mapping[str, Any]] = None):
        """打印阶段完成"""
        OutputFormatter.set_current_stage(None)
        if not OutputFormatter.PRINT_ENABLED:
            return
        print(OutputFormatter.SEPARATOR_SECTION * OutputFormatter.SEPARATOR_LENGTH)
        print(f"{OutputFormatter.format_stage_label(stage)} 完成")
        for key, value in (stats or {}).items():
            if isinstance(value, (dict, list)):
                continue
            print(f"  {key}: {OutputFormatter.format_value(value)}")
        print("")

    @staticmethod
    def print_warning(message: str):
        """打印警告信息"""
        if not OutputFormatter.PRINT_ENABLED:
            return
        print(f"\n⚠️  {OutputFormatter.format_stage_label()} {message}\n")

    @staticmethod
    def print_error(message: str, details: Optional[str] = None):
        """打印错误信息（错误总是输出）"""
        print(f"\n❌ {OutputFormatter.format_stage_label()} {message}")
        if details:
            print(f"   {details}")

    # ========================================================================
    # 汇总输出
    # ========================================================================

    @staticmethod
    def format_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        """左对齐的纯文本表格"""
        cells = [[str(h) for h in header]] + [[OutputFormatter.format_value(v) for v in row] for row in rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
        lines.insert(1, "  ".join(OutputFormatter.SEPARATOR_SECTION * w for w in widths))
        return "\n".join(lines)

    @staticmethod
    def print_summary(title: str, values: Dict[str, Any]):
        """打印键值汇总"""
        if not OutputFormatter.PRINT_ENABLED:
            return
        print(f"\n📝 {title}")
        for key, value in values.items():
            print(f"  {key}: {OutputFormatter.format_value(value)}")

    @staticmethod
    def print_table(title: str, header: Sequence[str], rows: Sequence[Sequence[Any]]):
        """打印表格"""
        if not OutputFormatter.PRINT_ENABLED:
            return
        print(f"\n📝 {title}")
        print(OutputFormatter.format_table(header, rows))


# ============================================================================
# 便捷函数
# ============================================================================

def print_stage_start(stage: str, details: Optional[Mapping[str, Any]] = None):
    """打印阶段开始横幅"""
    OutputFormatter.print_stage_start(stage, details)


def print_step(message: str, step: Optional[str] = None):
    """打印阶段内的进度行"""
    OutputFormatter.print_step(message, step)


def print_stage_complete(stage: str, stats: Optional[Mapping[str, Any]] = None):
    """打印阶段完成"""
    OutputFormatter.print_stage_complete(stage, stats)


def print_warning(message: str):
    OutputFormatter.print_warning(message)


def print_error(message: str, details: Optional[str] = None):
    OutputFormatter.print_error(message, details)
