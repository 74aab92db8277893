#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置文件管理器
统一管理求解器默认参数的读取
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class ConfigManager:
    """配置文件管理器"""

    def __init__(self, config_file: Optional[Path] = None):
        # 获取项目根目录
        self.root_dir = Path(__file__).parent.parent
        self.config_dir = self.root_dir / "config"

        # 配置文件路径
        self.solver_config = Path(config_file) if config_file else self.config_dir / "solver_config.json"
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """加载求解器配置，读取失败时回退到内置默认值"""
        try:
            if self.solver_config.exists():
                with open(self.solver_config, 'r', encoding='utf-8') as f:
                    config = json.load(f)
                logger.debug("[配置] 成功加载配置文件: %s", self.solver_config)
                return config
            logger.warning("[配置] 配置文件不存在: %s，使用默认配置", self.solver_config)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning("[配置] 加载配置文件失败: %s，使用默认配置", e)
        return self._get_default_config()

    @staticmethod
    def _get_default_config() -> Dict[str, Any]:
        """获取默认配置"""
        def v(value):
            return {"value": value}

        return {
            "monte_carlo": {"samples": v(200000), "seed": v(20240601)},
            "qre": {
                "damping": v(0.5), "tol": v(1e-10), "max_iter": v(10000),
                "grid": v(4096), "max_grid": v(262144), "multistart": v(32),
            },
            "procedure": {"tol": v(1e-9), "max_iter": v(5000), "phi_tolerance": v(1e-9)},
            "simulation": {
                "agents": v(100000), "rounds": v(1), "seed": v(0),
                "chunk_size": v(65536), "z_score": v(4.0),
            },
            "output": {"significant_digits": v(12)},
        }

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """获取某个参数的取值"""
        entry = self.config.get(section, {}).get(key)
        if entry is None:
            entry = self._get_default_config().get(section, {}).get(key)
        if entry is None:
            return default
        if isinstance(entry, dict):
            return entry.get("value", default)
        return entry

    def get_section(self, section: str) -> Dict[str, Any]:
        """获取整个分组的参数取值"""
        merged = dict(self._get_default_config().get(section, {}))
        merged.update(self.config.get(section, {}))
        return {k: (e.get("value") if isinstance(e, dict) else e) for k, e in merged.items()}

    def get_config_path(self) -> Path:
        """获取配置文件路径"""
        return self.solver_config


# 全局配置管理器实例
config_manager = ConfigManager()


def get_config_manager() -> ConfigManager:
    """获取全局配置管理器实例"""
    return config_manager
