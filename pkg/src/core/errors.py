"""
错误定义 - 统一的异常层级

每个异常类携带 CLI 退出码:
- 1: 用法 / 配置错误
- 2: 数据错误
- 3: 数值失败
"""

from typing import Optional


class MstAogError(Exception):
    """所有流水线异常的基类"""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict:
        return {
            'error': type(self).__name__,
            'message': self.message,
            'details': self.details,
            'exit_code': self.exit_code,
        }


class ConfigurationError(MstAogError):
    """配置错误（非法取值、未知协议、缺少协议属性）"""
    exit_code = 1


class UsageError(MstAogError):
    """命令行用法错误"""
    exit_code = 1


class IngestionError(MstAogError):
    """数据读取错误，消息中必须包含出错的路径"""
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, details: Optional[str] = None):
        if path is not None and path not in message:
            message = f"{message}: {path}"
        super().__init__(message, details)
        self.path = path


class SkeletonParseError(IngestionError):
    """骨架 / 包围盒 / 2D 关节记录格式错误，包含行号"""

    def __init__(self, message: str, path: str, line_number: int):
        super().__init__(f"{message} ({path}, line {line_number})", path=path)
        self.line_number = line_number


class DegenerateSkeletonError(MstAogError):
    """退化骨架（躯干长度为零或参考关节不可见）"""
    exit_code = 2


class SizeError(MstAogError):
    """图像、模板或特征图尺寸不合法"""
    exit_code = 2


class EmptyInputError(MstAogError):
    """输入为空（空检测列表、空序列、零正样本等）"""
    exit_code = 2


class NumericError(MstAogError):
    """数值失败（非正定协方差、目标函数非有限）"""
    exit_code = 3


class UnderdeterminedError(NumericError):
    """投影参数拟合欠定"""
    exit_code = 3
