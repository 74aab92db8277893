"""rationalize_manager.py
Δᵖ-可理性化分析管理器：串联过程迭代、结构分析与报告生成。
"""

from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Sequence

import pandas as pd

from gameLAYER.static_game import StaticGame
from modelLAYER.perturbation_model import TypeDistribution
from modelLAYER.qre_model import QreResult

from .procedure import ProcedureTrace, run_procedure
from .report import build_procedure_summary, build_tightness_table
from .structure import TightnessReport, tightness_report

logger = logging.getLogger(__name__)


class RationalizeManager:
    """可理性化过程与紧性分析管理器。"""

    def __init__(self) -> None:
        self.trace: Optional[ProcedureTrace] = None
        self.summary: Optional[Dict[str, Any]] = None
        self.report: Optional[TightnessReport] = None

    # ------------------------------------------------------------------
    # 公共接口
    # ------------------------------------------------------------------
    def rationalize(
        self,
        game: StaticGame,
        dists: Sequence[TypeDistribution],
        params: Optional[Dict[str, Any]] = None,
    ) -> pd.DataFrame:
        """运行过程迭代，返回下界轨迹表，摘要附在 ``attrs['summary']`` 中。

        参数
        ------
        params
            支持 tol, max_iter, method ("auto" / "monte_carlo"), samples, seed。
        """
        params = dict(params or {})
        logger.info("[理性化] 开始运行过程迭代...")
        self.trace = run_procedure(
            game,
            dists,
            tol=params.get("tol"),
            max_iter=params.get("max_iter"),
            method=params.get("method", "auto"),
            samples=params.get("samples"),
            seed=params.get("seed"),
        )
        self.summary = build_procedure_summary(game, dists, self.trace)
        df = self.trace.to_frame()
        df.attrs["summary"] = self.summary
        logger.info("[理性化] %s", self.summary["verdict"])
        return df

    def analyze_structure(
        self,
        game: StaticGame,
        dists: Sequence[TypeDistribution],
        qres: Optional[Sequence[QreResult]] = None,
    ) -> pd.DataFrame:
        """边际行动图分类与紧性判定表。"""
        self.report = tightness_report(game, dists, qres=qres, trace=self.trace)
        df = build_tightness_table(self.report)
        df.attrs["report"] = self.report
        return df
