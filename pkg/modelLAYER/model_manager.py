import logging
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from gameLAYER.static_game import StaticGame

from .perturbation_model import TypeDistribution
from .qre_model import QreResult, enumerate_qre_2x2, lower_envelope, solve_fixed_point, solve_multistart

logger = logging.getLogger(__name__)


class ModelManager:
    """
    模型管理器，负责选择 QRE 求解方式、运行求解并整理结果。
    """

    SOLVERS = ("auto", "enumeration", "fixed_point", "multistart")

    def __init__(self):
        self.solver = "auto"
        self.results: List[QreResult] = []
        self.complete = False

    def select_solver(self, solver_name: str) -> None:
        """
        选择求解方式。auto 对 2x2 博弈使用枚举，否则使用多起点。
        """
        if solver_name not in self.SOLVERS:
            logger.warning("[模型管理] 不支持的求解方式 '%s'，改用 auto", solver_name)
            solver_name = "auto"
        self.solver = solver_name
        logger.info("[模型管理] 已选择求解方式: %s", solver_name)

    def run_model(
        self,
        game: StaticGame,
        dists: Sequence[TypeDistribution],
        params: Optional[Dict[str, Any]] = None,
    ) -> List[QreResult]:
        """
        使用给定的博弈、类型分布和参数求解 QRE。
        """
        params = dict(params or {})
        solver = self.solver
        if solver == "auto":
            solver = "enumeration" if game.is_2x2() else "multistart"

        logger.info("[模型管理] 正在求解 QRE (%s)...", solver)
        if solver == "enumeration":
            self.results = enumerate_qre_2x2(game, dists, grid=params.get("grid"))
            self.complete = True
        elif solver == "fixed_point":
            self.results = [solve_fixed_point(
                game, dists,
                damping=params.get("damping"), tol=params.get("tol"), max_iter=params.get("max_iter"),
            )]
            self.complete = False
        else:
            self.results = solve_multistart(
                game, dists,
                starts=params.get("starts"), damping=params.get("damping"),
                tol=params.get("tol"), max_iter=params.get("max_iter"),
            )
            self.complete = False
        logger.info("[模型管理] 求解完成，共 %d 个结果", len(self.results))
        return self.results

    def envelope(self):
        """当前结果的下包络。"""
        return lower_envelope(self.results, complete=self.complete)

    def results_to_frame(self, game: StaticGame) -> pd.DataFrame:
        """
        将 QRE 结果转换为长表 DataFrame：每个 (qre, player, action) 一行
        """
        rows = []
        for k, res in enumerate(self.results):
            for i, player in enumerate(game.players):
                for a, action in enumerate(game.actions[i]):
                    rows.append({
                        "qre": k,
                        "player": player,
                        "action": action,
                        "probability": float(res.profile[i][a]),
                        "residual": res.residual,
                        "converged": res.converged,
                    })
        df = pd.DataFrame(rows, columns=["qre", "player", "action", "probability", "residual", "converged"])
        df.attrs["solver"] = self.solver
        df.attrs["complete"] = self.complete
        df.attrs["success"] = all(res.converged for res in self.results)
        return df
