"""
配置管理模块 - 统一管理流水线运行配置

支持多种配置方式（按优先级从低到高）:
1. Pydantic 模型中声明的默认值
2. 配置文件: 扁平 `section.key = value` 文本，`#` 开始注释
3. .env 文件中的 MSTAOG_<SECTION>__<KEY> 变量
4. 环境变量 MSTAOG_<SECTION>__<KEY>
5. 显式覆盖（命令行 --set section.key=value、--seed、--jobs）

值优先按 JSON 字面量解析（数字、true/false、列表），失败时保留为字符串。
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from ..schemas.config_schemas import RunConfig
from .errors import ConfigurationError


logger = logging.getLogger(__name__)

ENV_PREFIX = 'MSTAOG_'


def parse_value(raw: str) -> Any:
    """按 JSON 字面量解析配置值，失败时返回去掉引号的字符串"""
    text = raw.strip()
    try:
        return json.loads(text)
    except ValueError:
        return text.strip('"').strip("'")


def _split_key(key: str) -> tuple:
    parts = key.strip().split('.')
    if len(parts) != 2 or not all(parts):
        raise ConfigurationError(f"配置键必须为 section.key 形式: '{key}'")
    return parts[0], parts[1]


def _env_key(name: str) -> Optional[str]:
    """MSTAOG_FEATURES__CELL_SIZE -> features.cell_size，MSTAOG_TRAINING__ACTION_C -> training.action_C"""
    if not name.startswith(ENV_PREFIX) or '__' not in name:
        return None
    section, key = name[len(ENV_PREFIX):].split('__', 1)
    section, key = section.lower(), key.lower()
    field = RunConfig.model_fields.get(section)
    if field is not None:
        # 字段名可能含大写，按不区分大小写匹配
        names = {n.lower(): n for n in field.annotation.model_fields}
        key = names.get(key, key)
    return f"{section}.{key}"


class Config:
    """配置管理类 - 单例模式"""

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._values: Dict[str, Dict[str, Any]] = {}
            self._sources: Dict[str, str] = {}
            self._run_config: Optional[RunConfig] = None
            self._initialized = True

    def reset(self) -> 'Config':
        """清空所有已加载的配置（测试与重复调用 CLI 时使用）"""
        self._values = {}
        self._sources = {}
        self._run_config = None
        return self

    def set(self, key: str, value: Any, source: str = 'override') -> 'Config':
        """设置单个配置项 section.key"""
        section, name = _split_key(key)
        if isinstance(value, str):
            value = parse_value(value)
        self._values.setdefault(section, {})[name] = value
        self._sources[f"{section}.{name}"] = source
        self._run_config = None
        return self

    def load_from_file(self, path: str) -> 'Config':
        """从扁平 key = value 配置文件加载"""
        config_file = Path(path)
        if not config_file.is_file():
            raise ConfigurationError(f"配置文件不存在: {path}")

        with open(config_file, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ConfigurationError(
                        f"配置文件格式错误 ({path}, line {line_number}): 缺少 '='"
                    )
                key, value = line.split('=', 1)
                self.set(key, value, source=f"{path}:{line_number}")
        return self

    def load_from_dotenv(self, dotenv_path: str = '.env') -> 'Config':
        """从 .env 文件加载 MSTAOG_ 前缀的变量"""
        if not Path(dotenv_path).exists():
            return self
        for name, value in dotenv_values(dotenv_path).items():
            key = _env_key(name)
            if key is not None and value is not None:
                self.set(key, value, source=dotenv_path)
        return self

    def load_from_env(self) -> 'Config':
        """从环境变量加载"""
        for name in sorted(os.environ):
            key = _env_key(name)
            if key is not None:
                self.set(key, os.environ[name], source='env')
        return self

    def apply_overrides(self, overrides: Iterable[str]) -> 'Config':
        """应用 section.key=value 形式的覆盖项"""
        for item in overrides:
            if '=' not in item:
                raise ConfigurationError(f"覆盖项必须为 section.key=value 形式: '{item}'")
            key, value = item.split('=', 1)
            self.set(key, value)
        return self

    def set_seed(self, seed: int) -> 'Config':
        """手动设置随机种子"""
        return self.set('runtime.seed', int(seed))

    def set_jobs(self, jobs: int) -> 'Config':
        """手动设置工作线程数"""
        return self.set('runtime.jobs', int(jobs))

    def validate(self) -> RunConfig:
        """
        合并并校验配置

        Raises:
            ConfigurationError: 出现未知键或取值违反约束，消息中包含出错的键
        """
        try:
            run_config = RunConfig.model_validate(self._values)
        except ValidationError as e:
            problems = []
            for error in e.errors():
                key = '.'.join(str(p) for p in error['loc'])
                source = self._sources.get(key)
                where = f" (来自 {source})" if source else ""
                problems.append(f"{key or '<root>'}: {error['msg']}{where}")
            raise ConfigurationError(
                "配置校验失败:\n  " + "\n  ".join(problems),
                details=str(e),
            )
        self._run_config = run_config
        return run_config

    @property
    def run_config(self) -> RunConfig:
        """获取校验后的运行配置"""
        if self._run_config is None:
            return self.validate()
        return self._run_config

    def is_configured(self) -> bool:
        return self._run_config is not None

    def describe(self) -> Dict[str, str]:
        """每个显式设置的配置项及其来源"""
        return dict(sorted(self._sources.items()))


# ============================================================================
# 便捷函数
# ============================================================================

def get_config() -> Config:
    """获取配置实例（单例）"""
    return Config()


def setup_config(
    config_file: Optional[str] = None,
    overrides: Optional[Iterable[str]] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    use_dotenv: bool = True,
    use_env: bool = True,
    dotenv_path: str = '.env',
) -> Config:
    """
    设置配置并返回配置实例

    Args:
        config_file: 扁平 key = value 配置文件
        overrides: section.key=value 覆盖项（最高优先级）
        seed: 随机种子
        jobs: 工作线程数
        use_dotenv: 是否从 .env 文件加载
        use_env: 是否从环境变量加载
        dotenv_path: .env 文件路径

    Returns:
        Config 实例（已校验）
    """
    config = get_config().reset()

    if config_file:
        config.load_from_file(config_file)
    if use_dotenv:
        config.load_from_dotenv(dotenv_path)
    if use_env:
        config.load_from_env()
    if overrides:
        config.apply_overrides(overrides)
    if seed is not None:
        config.set_seed(seed)
    if jobs is not None:
        config.set_jobs(jobs)

    run_config = config.validate()
    logger.debug("config loaded: %d explicit keys, seed=%d", len(config.describe()), run_config.runtime.seed)
    return config


def ensure_configured() -> RunConfig:
    """
    确保配置已设置，如果未设置则从 .env 与环境变量自动加载

    Raises:
        ConfigurationError: 配置校验失败
    """
    config = get_config()
    if not config.is_configured():
        config.load_from_dotenv().load_from_env()
    return config.validate()
