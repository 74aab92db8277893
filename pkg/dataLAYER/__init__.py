"""
数据管理层，包含博弈文件解析与结果导出。
"""

from .data_manager import DataManager
from .game_file import GameDefinition, GameFileError, parse_game

__all__ = ["DataManager", "GameDefinition", "GameFileError", "parse_game"]
