from __future__ import annotations

from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from gameLAYER.static_game import MixedProfile, StaticGame
from modelLAYER.perturbation_model import TypeDistribution
from modelLAYER.qre_model import qre_residual

from .procedure import ProcedureTrace, check_distribution
from .structure import TightnessReport

LIMIT_IS_QRE = "limit is a QRE"
LIMIT_SUMS_BELOW_ONE = "limit is NOT a QRE (per-player bound sums < 1)"
LIMIT_RESIDUAL_TOO_LARGE = "limit is NOT a QRE (fixed-point residual too large)"


def limit_profile(trace: ProcedureTrace) -> MixedProfile | None:
    """下界之和为 1 时，极限下界本身构成一个混合组合。"""
    sums = trace.bound_sums()
    if np.any(np.abs(sums - 1.0) > 1e-6):
        return None
    return MixedProfile(tuple(v / v.sum() for v in trace.limit.q))


def build_procedure_summary(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    trace: ProcedureTrace,
    qre_tol: float = 1e-6,
) -> Dict[str, Any]:
    """极限下界、各玩家下界之和以及极限是否为 QRE。"""
    limits = {
        f"{game.node_label(i, a)}": float(trace.limit[i][a])
        for i in range(game.n_players) for a in range(game.shape[i])
    }
    sums = {player: float(s) for player, s in zip(game.players, trace.bound_sums())}
    profile = limit_profile(trace)
    residual = None
    if profile is None:
        verdict = LIMIT_SUMS_BELOW_ONE
    else:
        residual = qre_residual(game, dists, profile)
        verdict = LIMIT_IS_QRE if residual <= qre_tol else LIMIT_RESIDUAL_TOO_LARGE
    return {
        "steps": trace.n_steps,
        "converged": trace.converged,
        "sup_step": trace.sup_step,
        "limits": limits,
        "sums": sums,
        "residual": residual,
        "verdict": verdict,
    }


def build_tightness_table(report: TightnessReport) -> pd.DataFrame:
    """每个行动一行的分类与判定表。"""
    rows: List[Dict[str, Any]] = []
    for entry in report.actions:
        rows.append({
            "node": entry.label,
            "non_serial": entry.non_serial,
            "eventually_non_serial": entry.eventually_non_serial,
            "C1": entry.c1,
            "C2": entry.c2,
            "C2'": entry.c2_prime,
            "verdict": entry.verdict,
        })
    df = pd.DataFrame(rows, columns=["node", "non_serial", "eventually_non_serial", "C1", "C2", "C2'", "verdict"])
    df.attrs["serial"] = report.serial
    df.attrs["qre_count"] = report.qre_count
    df.attrs["notice"] = report.notice
    return df


def build_check_table(profile: MixedProfile, trace: ProcedureTrace, tol: float = 1e-9) -> pd.DataFrame:
    """观测分布对极限下界的逐玩家检查表。"""
    verdicts = check_distribution(profile, trace, tol=tol)
    return pd.DataFrame(
        [
            {
                "player": v.player,
                "passed": v.passed,
                "mode": v.mode,
                "binding_action": v.binding_action,
                "binding_bound": v.binding_bound,
                "margin": v.margin,
            }
            for v in verdicts
        ],
        columns=["player", "passed", "mode", "binding_action", "binding_bound", "margin"],
    )
