import logging
from pathlib import Path
from typing import Dict, Optional

import pandas as pd  # type: ignore

from .game_file import GameDefinition, GameFileError, parse_game
from .mixins import FileIOMixin

logger = logging.getLogger(__name__)


class DataManager(FileIOMixin):
    """博弈文件加载与结果导出。"""

    EXAMPLES_DIR = Path(__file__).resolve().parent.parent / "data" / "examples"

    def __init__(self):
        # 已加载的博弈，按路径缓存
        self.games: Dict[str, GameDefinition] = {}

    def load_game(self, file_path) -> GameDefinition:
        """读取并解析博弈文件；读取或解码失败同样视为文件错误。"""
        path = Path(file_path)
        try:
            text = self._read_text_robustly(path)
        except UnicodeDecodeError as exc:
            raise GameFileError(f"{path}: file is not valid UTF-8 ({exc.reason})") from exc
        except OSError as exc:
            raise GameFileError(f"{path}: cannot read file ({exc.strerror})") from exc
        definition = parse_game(text, source=str(path))
        self.games[str(path)] = definition
        logger.info("[数据管理] 已加载博弈 %s，规模 %s", path.name, definition.game.shape)
        return definition

    def example_path(self, name: str) -> Path:
        """内置示例文件路径，如 ``vaccination.json``。"""
        return self.EXAMPLES_DIR / name

    def load_example(self, name: str) -> GameDefinition:
        return self.load_game(self.example_path(name))

    def export_csv(self, df: pd.DataFrame, file_path) -> Optional[Path]:
        return self._write_csv_portable(df, file_path)

    def export_text(self, text: str, file_path) -> Optional[Path]:
        return self._write_text(text, file_path)
