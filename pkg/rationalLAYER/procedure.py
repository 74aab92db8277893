"""procedure.py
Δᵖ-可理性化过程：以行动概率下界的形式逐步迭代。

核心思路
------------------------------------------------
• 第 n 步的状态只用每个 (i, a_i) 的下界 qⁿ_{i,a_i} 描述，上界由单纯形约束推出：
  sup π_i(a) = 1 − Σ_{a′≠a} qⁿ_{i,a′}。
• 对手信念可行 ⇔ 每个对手 j 的分布落在单纯形上且逐坐标不低于 qⁿ_j。
• (i, a_i) 的新下界 = 在最坏信念下只有 a_i 仍为最优反应的类型区域质量。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config.config_manager import get_config_manager
from config.performance_manager import get_performance_manager
from gameLAYER.static_game import (
    ActionRef,
    GameInputError,
    MixedProfile,
    PlayerRef,
    StaticGame,
    UnsupportedShapeError,
    expected_payoffs,
    payoff_difference,
)
from modelLAYER.perturbation_model import (
    ForcedRegionSpec,
    TypeDistribution,
    forced_region_probability,
    monte_carlo_response,
)
from modelLAYER.qre_model import check_distributions

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-12
BOUND_SUM_SLACK = 1e-12


class MonotonicityError(RuntimeError):
    """过程迭代出现下界下降（超出 −1e−12）。"""


@dataclass(frozen=True, eq=False)
class BoundsVector:
    """每个 (i, a_i) 的下界 q[i][a_i]。"""

    q: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        vectors = []
        for k, vec in enumerate(self.q):
            arr = np.array(vec, dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
                raise GameInputError(f"第 {k + 1} 个玩家的下界必须在 [0, 1] 内: {arr}")
            if arr.sum() > 1.0 + BOUND_SUM_SLACK:
                raise GameInputError(f"第 {k + 1} 个玩家的下界之和 {arr.sum()} 超过 1")
            arr.setflags(write=False)
            vectors.append(arr)
        object.__setattr__(self, "q", tuple(vectors))

    @classmethod
    def zeros(cls, game: StaticGame) -> "BoundsVector":
        return cls(tuple(np.zeros(k) for k in game.shape))

    def __getitem__(self, i: int) -> np.ndarray:
        return self.q[i]

    def __len__(self) -> int:
        return len(self.q)

    def as_array(self) -> np.ndarray:
        return np.concatenate(self.q)

    def upper(self, i: int, a: int) -> float:
        """由单纯形约束推出的上界 1 − Σ_{a′≠a} q[i][a′]。"""
        return float(1.0 - (self.q[i].sum() - self.q[i][a]))

    def leftover(self, j: int) -> float:
        return float(max(0.0, 1.0 - self.q[j].sum()))

    def matches(self, game: StaticGame) -> bool:
        return tuple(v.size for v in self.q) == game.shape


@dataclass(frozen=True)
class ProcedureTrace:
    """过程轨迹：steps[0] 全零，limit 为最后一次迭代。"""

    players: Tuple[str, ...]
    actions: Tuple[Tuple[str, ...], ...]
    steps: List[BoundsVector] = field(repr=False)
    converged: bool
    sup_step: float

    @property
    def limit(self) -> BoundsVector:
        return self.steps[-1]

    @property
    def n_steps(self) -> int:
        return len(self.steps) - 1

    def player_index(self, player: PlayerRef) -> int:
        if isinstance(player, (int, np.integer)) and not isinstance(player, bool):
            if 0 <= int(player) < len(self.players):
                return int(player)
        elif str(player) in self.players:
            return self.players.index(str(player))
        raise GameInputError(f"未知玩家: {player!r}")

    def bound_sums(self) -> np.ndarray:
        return np.array([v.sum() for v in self.limit.q])

    def to_frame(self) -> pd.DataFrame:
        """导出为长表：step, player, action, bound。"""
        rows = []
        for n, bounds in enumerate(self.steps):
            for i, player in enumerate(self.players):
                for a, action in enumerate(self.actions[i]):
                    rows.append((n, player, action, float(bounds[i][a])))
        return pd.DataFrame(rows, columns=["step", "player", "action", "bound"])


@dataclass(frozen=True)
class DistributionVerdict:
    """某个玩家的观测分布是否满足极限下界。"""

    player: str
    passed: bool
    mode: str
    binding_action: str
    binding_bound: float
    margin: float


@dataclass(frozen=True)
class WitnessReport:
    """QRE 推前构造的核验结果。"""

    player: str
    pushforward: np.ndarray
    std_error: np.ndarray
    deviation: float
    belief_feasible: bool


# ----------------------------------------------------------------------
# 最坏情形阈值
# ----------------------------------------------------------------------
def _vertex_matrix(bounds: BoundsVector, j: int) -> np.ndarray:
    """对手 j 截断单纯形的顶点：下界向量 + 剩余质量放在某一个坐标上（按行排列）。"""
    lower = bounds[j]
    return lower[None, :] + bounds.leftover(j) * np.eye(lower.size)


def worst_case_threshold(
    game: StaticGame,
    player: PlayerRef,
    action: ActionRef,
    rival: ActionRef,
    bounds: BoundsVector,
) -> float:
    """max over feasible beliefs of Σ q_{−i}(a_{−i})·[u_i(a_i′, a_{−i}) − u_i(a_i, a_{−i})]。

    两人博弈按贪心法求解线性规划；多人博弈目标在截断单纯形的乘积上是多线性的，
    最大值在顶点组合处取得，逐一枚举。
    """
    i = game.player_index(player)
    if not bounds.matches(game):
        raise GameInputError("下界向量与博弈规模不一致")
    coef = payoff_difference(game, i, action, rival)
    opponents = game.opponents(i)
    if len(opponents) == 1:
        j = opponents[0]
        return float(bounds[j] @ coef + bounds.leftover(j) * coef.max())

    values = coef
    for axis, j in enumerate(opponents):
        values = np.moveaxis(np.tensordot(_vertex_matrix(bounds, j), values, axes=([1], [axis])), 0, axis)
    return float(values.max())


def _thresholds(game: StaticGame, i: int, a: int, bounds: BoundsVector) -> Dict[int, float]:
    return {
        b: worst_case_threshold(game, i, a, b, bounds)
        for b in range(game.shape[i]) if b != a
    }


def step_bounds(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    bounds: BoundsVector,
    method: str = "auto",
    samples: Optional[int] = None,
    seed=None,
) -> BoundsVector:
    """一步更新：每个 (i, a_i) 取最坏阈值下的强制区域质量。"""
    check_distributions(game, dists)
    if method == "monte_carlo" and seed is None:
        # 同一玩家的各行动共用一批样本，区域互不相交
        seed = get_config_manager().get("monte_carlo", "seed")
    pairs = [(i, a) for i in range(game.n_players) for a in range(game.shape[i])]

    def evaluate(pair):
        i, a = pair
        spec = ForcedRegionSpec(a, _thresholds(game, i, a, bounds))
        return forced_region_probability(dists[i], spec, method=method, samples=samples, seed=seed)

    values = get_performance_manager().map_ordered(evaluate, pairs)
    new = [np.zeros(k) for k in game.shape]
    for (i, a), value in zip(pairs, values):
        new[i][a] = value
    return BoundsVector(tuple(new))


def run_procedure(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    method: str = "auto",
    samples: Optional[int] = None,
    seed=None,
) -> ProcedureTrace:
    """从全零下界出发迭代 step_bounds，直到 sup 范数步长小于 tol 或达到 max_iter。"""
    cfg = get_config_manager()
    tol = cfg.get("procedure", "tol") if tol is None else tol
    max_iter = int(cfg.get("procedure", "max_iter") if max_iter is None else max_iter)
    if tol <= 0:
        raise GameInputError(f"容差必须为正，得到 {tol}")

    perf = get_performance_manager()
    t0 = perf.start_timer()
    steps = [BoundsVector.zeros(game)]
    converged = False
    sup_step = np.inf
    for n in range(1, max_iter + 1):
        new = step_bounds(game, dists, steps[-1], method=method, samples=samples, seed=seed)
        diff = new.as_array() - steps[-1].as_array()
        if diff.min() < -MONOTONE_SLACK:
            raise MonotonicityError(f"第 {n} 步下界下降 {diff.min():.3e}")
        steps.append(new)
        sup_step = float(np.abs(diff).max())
        if sup_step < tol:
            converged = True
            break

    if converged:
        logger.info("[理性化] %d 步收敛，末步步长 %.3e", len(steps) - 1, sup_step)
    else:
        logger.warning("[理性化] 达到最大迭代次数 %d 仍未收敛，末步步长 %.3e", max_iter, sup_step)
    perf.end_timer(t0, "理性化过程")
    return ProcedureTrace(game.players, game.actions, steps, converged, sup_step)


# ----------------------------------------------------------------------
# 可理性化分布
# ----------------------------------------------------------------------
def rationalizable_interval(trace: ProcedureTrace, player: PlayerRef) -> Dict[str, Tuple[float, float]]:
    """两行动玩家的精确可理性化区间 [q*_a, 1 − q*_{a′}]。"""
    i = trace.player_index(player)
    actions = trace.actions[i]
    if len(actions) != 2:
        raise UnsupportedShapeError(f"区间形式只适用于两行动玩家，玩家 {trace.players[i]!r} 有 {len(actions)} 个行动")
    q = trace.limit[i]
    return {
        actions[0]: (float(q[0]), float(1.0 - q[1])),
        actions[1]: (float(q[1]), float(1.0 - q[0])),
    }


def check_distribution(
    profile: MixedProfile,
    trace: ProcedureTrace,
    tol: float = 1e-9,
    allowance: Optional[Sequence[Union[float, np.ndarray]]] = None,
) -> List[DistributionVerdict]:
    """逐玩家检查 π̂_i(a) ≥ q*_{i,a} − tol。

    两行动玩家该检查即精确判定（等价于落在可理性化区间内）；多行动玩家只是必要条件。
    ``allowance`` 可为每个玩家额外附加的容许量（如抽样误差）。
    """
    limit = trace.limit
    if len(profile) != len(limit) or any(p.size != q.size for p, q in zip(profile.dist, limit.q)):
        raise GameInputError("观测分布与过程轨迹的规模不一致")
    verdicts = []
    for i, player in enumerate(trace.players):
        extra = 0.0 if allowance is None else np.asarray(allowance[i], dtype=float)
        margin = profile[i] - limit[i] + tol + extra
        k = int(np.argmin(margin))
        verdicts.append(DistributionVerdict(
            player=player,
            passed=bool(np.all(margin >= 0.0)),
            mode="exact" if profile[i].size == 2 else "necessary-only",
            binding_action=trace.actions[i][k],
            binding_bound=float(limit[i][k]),
            margin=float(profile[i][k] - limit[i][k]),
        ))
    return verdicts


def qre_pushforward_witness(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    qre: MixedProfile,
    trace: ProcedureTrace,
    samples: Optional[int] = None,
    seed=None,
) -> List[WitnessReport]:
    """QRE 的类型到行动推前构造。

    选择 c_j(θ_j) = 对 π_{−j} 的最优反应（平局取声明顺序靠前者），用蒙特卡洛估计 p_j 经 c_j
    的推前分布，并检查 π 在过程的每一步是否都是可行信念。
    """
    cfg = get_config_manager()
    samples = int(cfg.get("monte_carlo", "samples") if samples is None else samples)
    seed = cfg.get("monte_carlo", "seed") if seed is None else seed
    check_distributions(game, dists)
    reports = []
    for j, player in enumerate(game.players):
        u = expected_payoffs(game, j, qre)
        push, se = monte_carlo_response(dists[j], u, samples, np.random.SeedSequence([int(seed), j]))
        feasible = all(np.all(qre[j] >= step[j] - 1e-9) for step in trace.steps)
        reports.append(WitnessReport(
            player=player,
            pushforward=push,
            std_error=se,
            deviation=float(np.max(np.abs(push - qre[j]))),
            belief_feasible=bool(feasible),
        ))
        logger.debug("[理性化] 玩家 %s 推前偏差 %.3e", player, reports[-1].deviation)
    return reports
