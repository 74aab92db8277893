from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import pandas as pd  # type: ignore

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class FileIOMixin:
    """提供稳健的文本读取与可移植的 CSV/文本写出。"""

    float_format = "%.12g"

    def _read_text_robustly(self, file_path: PathLike) -> str:
        """
        以 UTF-8 读取文本文件，容忍 BOM。
        """
        path = Path(file_path)
        text = path.read_text(encoding="utf-8-sig")
        logger.debug("[数据读取] 成功读取: %s", path.name)
        return text

    def _write_csv_portable(self, df: pd.DataFrame, file_path: PathLike) -> Path:
        """
        写出与区域设置无关的 CSV：'.' 小数点，'\\n' 换行，总是带表头。
        """
        path = Path(file_path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            df.to_csv(f, index=False, lineterminator="\n", float_format=self.float_format)
        logger.info("[数据写出] 已写出 %d 行: %s", len(df), path)
        return path

    def _write_text(self, text: str, file_path: PathLike) -> Path:
        path = Path(file_path)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info("[数据写出] 已写出: %s", path)
        return path
