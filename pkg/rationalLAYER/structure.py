"""structure.py
两人博弈的边际行动结构：φ/Φ 对应、有向图、行动分类、条件 C1/C2/C2′ 与紧性判定。

记号
------------------------------------------------
• φ_i(a, a′) = {a_{−i} : u_i(a′, a_{−i}) − u_i(a, a_{−i}) < H̄_i^{a,a′}}；
• Φ_i(a) = ∪_{a′≠a} φ_i(a, a′)；图中 a_i ⇒ a_j 当且仅当 a_j ∈ Φ_i(a_i)；
• 节点记为 (玩家下标, 行动下标)，显示名形如 ``NV1``。
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config.config_manager import get_config_manager
from gameLAYER.static_game import (
    ActionRef,
    GameInputError,
    MixedProfile,
    PlayerRef,
    StaticGame,
    UnsupportedShapeError,
    payoff_difference,
    payoff_gap,
)
from modelLAYER.perturbation_model import TypeDistribution
from modelLAYER.qre_model import QreResult, enumerate_qre_2x2, qre_residual

from .procedure import ProcedureTrace

logger = logging.getLogger(__name__)

Node = Tuple[int, int]

GUARANTEED_TIGHT = "GUARANTEED_TIGHT"
STRICTLY_LOOSE = "STRICTLY_LOOSE"
UNDETERMINED = "UNDETERMINED"
RELAXED_NOTICE = "conditions are relaxed criteria only"

_DOT_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _require_two_players(game: StaticGame) -> None:
    if game.n_players != 2:
        raise UnsupportedShapeError(
            f"边际行动图只对两人博弈定义，当前 {game.n_players} 人；{RELAXED_NOTICE}"
        )


def _phi_indices(diff: np.ndarray, tol: float) -> np.ndarray:
    """差值严格小于最大值的下标。极差不超过 tol 时视为常数，返回空。"""
    upper, lower = float(diff.max()), float(diff.min())
    spread = upper - lower
    if spread <= tol:
        return np.zeros(diff.shape, dtype=bool)
    # 容差不超过极差的四分之一，保证 φ(a,a′) ∪ φ(a′,a) 覆盖全部对手行动
    eps = min(tol, spread / 4.0)
    return diff < upper - eps


def phi(
    game: StaticGame,
    player: PlayerRef,
    action: ActionRef,
    rival: ActionRef,
    tol: Optional[float] = None,
) -> FrozenSet[int]:
    """φ_i(a, a′)：对手行动下标集合。"""
    _require_two_players(game)
    tol = get_config_manager().get("procedure", "phi_tolerance") if tol is None else tol
    diff = payoff_difference(game, player, action, rival)
    return frozenset(int(k) for k in np.nonzero(_phi_indices(diff, tol))[0])


def profile_phi(
    game: StaticGame,
    player: PlayerRef,
    action: ActionRef,
    rival: ActionRef,
    tol: Optional[float] = None,
) -> FrozenSet[Tuple[int, ...]]:
    """多人博弈中的 φ：元素为对手行动组合。"""
    tol = get_config_manager().get("procedure", "phi_tolerance") if tol is None else tol
    diff = payoff_difference(game, player, action, rival)
    return frozenset(tuple(int(x) for x in idx) for idx in zip(*np.nonzero(_phi_indices(diff, tol))))


def marginal_actions(game: StaticGame, player: PlayerRef, action: ActionRef, tol: Optional[float] = None) -> FrozenSet[int]:
    """Φ_i(a_i)。"""
    i = game.player_index(player)
    a = game.action_index(i, action)
    out: FrozenSet[int] = frozenset()
    for b in range(game.shape[i]):
        if b != a:
            out = out | phi(game, i, a, b, tol)
    return out


@dataclass(frozen=True)
class MarginalGraph:
    """A₁ ∪ A₂ 上的有向图，边只跨越玩家。"""

    graph: nx.DiGraph = field(repr=False)

    @property
    def nodes(self) -> List[Node]:
        return list(self.graph.nodes)

    @property
    def edges(self) -> List[Tuple[Node, Node]]:
        return list(self.graph.edges)

    def label(self, node: Node) -> str:
        return self.graph.nodes[node]["label"]

    def successors(self, node: Node) -> FrozenSet[Node]:
        return frozenset(self.graph.successors(node))

    def edge_lines(self) -> List[str]:
        return [f"{_dot_id(self.label(u))} -> {_dot_id(self.label(v))}" for u, v in self.edges]

    def to_dot(self) -> str:
        """DOT 文本：每条边一行，如 ``NV1 -> V2``。"""
        lines = ["digraph marginal {"]
        lines += [f"  {_dot_id(self.label(n))}" for n in self.nodes]
        lines += [f"  {line}" for line in self.edge_lines()]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_id(label: str) -> str:
    if _DOT_ID.match(label):
        return label
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def marginal_graph(game: StaticGame, tol: Optional[float] = None) -> MarginalGraph:
    """由 Φ 对应构造有向图。"""
    _require_two_players(game)
    g = nx.DiGraph()
    for i in range(2):
        for a, name in enumerate(game.actions[i]):
            g.add_node((i, a), label=game.node_label(i, a), player=game.players[i], action=name)
    for i in range(2):
        j = 1 - i
        for a in range(game.shape[i]):
            for b in sorted(marginal_actions(game, i, a, tol)):
                g.add_edge((i, a), (j, b))
    return MarginalGraph(g)


def reachable_set(graph: MarginalGraph, node: Node, mode: str = "component") -> FrozenSet[Node]:
    """R(a)：包含该节点的弱连通分量。

    ``mode="ancestry"`` 给出另一种读法：祖先 ∪ 后代 ∪ 自身。
    """
    if node not in graph.graph:
        raise GameInputError(f"节点 {node} 不在图中")
    if mode == "component":
        return frozenset(nx.node_connected_component(graph.graph.to_undirected(as_view=True), node))
    if mode == "ancestry":
        return frozenset(nx.ancestors(graph.graph, node) | nx.descendants(graph.graph, node) | {node})
    raise GameInputError(f"未知可达集读法: {mode!r}")


# ----------------------------------------------------------------------
# 分类与条件
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ActionClassification:
    node: Node
    label: str
    non_serial: bool
    eventually_non_serial: bool
    c1: bool
    c2: bool
    c2_prime: bool
    reach: FrozenSet[Node]


@dataclass(frozen=True)
class GameClassification:
    graph: MarginalGraph
    actions: Dict[Node, ActionClassification]
    serial: bool

    def __getitem__(self, node: Node) -> ActionClassification:
        return self.actions[node]


def _c2(graph: MarginalGraph, node: Node) -> bool:
    marginals = graph.successors(node)
    if len(marginals) != 1:
        return False
    (target,) = marginals
    return graph.successors(target) == frozenset({node})


def _c2_prime(graph: MarginalGraph, node: Node) -> bool:
    if len(graph.successors(node)) != 1:
        return False
    reach = reachable_set(graph, node)
    if len(reach) == graph.graph.number_of_nodes():
        return False
    return all(graph.successors(n) for n in reach)


def condition_c2(game: StaticGame, player: PlayerRef, action: ActionRef, graph: Optional[MarginalGraph] = None) -> bool:
    """|Φ_i(a_i)| = 1 且 Φ_{−i}(Φ_i(a_i)) = {a_i}。"""
    graph = graph or marginal_graph(game)
    i = game.player_index(player)
    return _c2(graph, (i, game.action_index(i, action)))


def condition_c2_prime(game: StaticGame, player: PlayerRef, action: ActionRef, graph: Optional[MarginalGraph] = None) -> bool:
    """可达集判据：|Φ(a)| = 1，R(a) ≠ A₁ ∪ A₂，且 R(a) 内没有非序列节点。"""
    graph = graph or marginal_graph(game)
    i = game.player_index(player)
    return _c2_prime(graph, (i, game.action_index(i, action)))


def classify(game: StaticGame, tol: Optional[float] = None) -> GameClassification:
    """非序列 / 最终非序列 / C1 / C2 / C2′ 以及博弈层面的序列标志。"""
    graph = marginal_graph(game, tol)
    actions: Dict[Node, ActionClassification] = {}
    for node in graph.nodes:
        marginals = graph.successors(node)
        non_serial = not marginals
        eventually = any(not graph.successors(m) for m in marginals)
        actions[node] = ActionClassification(
            node=node,
            label=graph.label(node),
            non_serial=non_serial,
            eventually_non_serial=eventually,
            c1=non_serial or eventually,
            c2=_c2(graph, node),
            c2_prime=_c2_prime(graph, node),
            reach=reachable_set(graph, node),
        )
    serial = not any(c.non_serial for c in actions.values())
    return GameClassification(graph, actions, serial)


# ----------------------------------------------------------------------
# 紧性判定
# ----------------------------------------------------------------------
def limit_threshold(game: StaticGame, player: PlayerRef, action: ActionRef, q_j_star: float) -> float:
    """极限处的最坏阈值 (1 − q*_{j,a_j})·H̄ + q*_{j,a_j}·H̲，a_j 为 a_i 唯一的边际行动。"""
    _require_two_players(game)
    i = game.player_index(player)
    a = game.action_index(i, action)
    if game.shape[i] != 2:
        raise UnsupportedShapeError("极限阈值恒等式只适用于两行动玩家")
    if not 0.0 <= q_j_star <= 1.0:
        raise GameInputError(f"q* 必须在 [0, 1] 内，得到 {q_j_star}")
    gap = payoff_gap(game, i, a, 1 - a)
    return (1.0 - q_j_star) * gap.upper + q_j_star * gap.lower


def mutual_fulfillment_profile(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    trace: ProcedureTrace,
    player: PlayerRef,
    action: ActionRef,
) -> Tuple[MixedProfile, float]:
    """满足 C2 的行动 a_i 与其边际行动 a_j 的极限下界拼成的组合，及其 QRE 残差。"""
    if not game.is_2x2():
        raise UnsupportedShapeError("互相实现组合只对 2x2 博弈定义")
    i = game.player_index(player)
    a = game.action_index(i, action)
    graph = marginal_graph(game)
    if not _c2(graph, (i, a)):
        raise GameInputError(f"行动 {game.node_label(i, a)} 不满足 C2")
    ((j, b),) = graph.successors((i, a))
    q = trace.limit
    vecs: List[np.ndarray] = [np.zeros(2), np.zeros(2)]
    vecs[i][a], vecs[i][1 - a] = q[i][a], 1.0 - q[i][a]
    vecs[j][b], vecs[j][1 - b] = q[j][b], 1.0 - q[j][b]
    profile = MixedProfile(tuple(vecs))
    return profile, qre_residual(game, dists, profile)


@dataclass(frozen=True)
class ActionVerdict:
    node: Node
    label: str
    player: str
    action: str
    non_serial: bool
    eventually_non_serial: bool
    c1: bool
    c2: bool
    c2_prime: bool
    verdict: str
    reason: str


@dataclass(frozen=True)
class TightnessReport:
    actions: List[ActionVerdict]
    serial: bool
    qre_count: Optional[int]
    relaxed: bool
    notice: str = ""
    fulfillment: Dict[str, Tuple[MixedProfile, float]] = field(default_factory=dict, repr=False)

    def verdict(self, label: str) -> str:
        for entry in self.actions:
            if entry.label == label:
                return entry.verdict
        raise GameInputError(f"未知行动节点: {label!r}")


def tightness_report(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    qres: Optional[Sequence[QreResult]] = None,
    trace: Optional[ProcedureTrace] = None,
) -> TightnessReport:
    """按 C1/C2 与 QRE 个数给出每个行动的紧性判定。

    QRE 多于一个且存在 C1、C2 都不满足的行动时，全部行动判为 STRICTLY_LOOSE；
    否则 C1 或 C2 成立 → GUARANTEED_TIGHT，其余为 UNDETERMINED。非 2x2 的两人博弈只给出宽松判据。
    """
    _require_two_players(game)
    cls = classify(game)
    relaxed = not game.is_2x2()
    qre_count: Optional[int] = None
    if not relaxed:
        if qres is None:
            qres = enumerate_qre_2x2(game, dists)
        qre_count = sum(1 for r in qres if r.converged)

    some_fail = any(not (c.c1 or c.c2) for c in cls.actions.values())
    loose = qre_count is not None and qre_count > 1 and some_fail

    entries = []
    fulfillment: Dict[str, Tuple[MixedProfile, float]] = {}
    for node, c in cls.actions.items():
        i, a = node
        if loose:
            verdict, reason = STRICTLY_LOOSE, "multiple QRE"
        elif c.c1:
            verdict, reason = GUARANTEED_TIGHT, "C1"
        elif c.c2:
            verdict, reason = GUARANTEED_TIGHT, "C2"
        else:
            verdict, reason = UNDETERMINED, "no condition"
        entries.append(ActionVerdict(
            node=node, label=c.label, player=game.players[i], action=game.actions[i][a],
            non_serial=c.non_serial, eventually_non_serial=c.eventually_non_serial,
            c1=c.c1, c2=c.c2, c2_prime=c.c2_prime, verdict=verdict, reason=reason,
        ))
        if c.c2 and trace is not None and not relaxed:
            fulfillment[c.label] = mutual_fulfillment_profile(game, dists, trace, i, a)

    logger.info("[结构分析] 紧性判定完成：%s", ", ".join(f"{e.label}={e.verdict}" for e in entries))
    return TightnessReport(
        actions=entries,
        serial=cls.serial,
        qre_count=qre_count,
        relaxed=relaxed,
        notice=RELAXED_NOTICE if relaxed else "",
        fulfillment=fulfillment,
    )


@dataclass(frozen=True)
class ImpossibilityCheck:
    applicable: bool
    holds: bool
    witness: Optional[str]
    reason: str


def c2_impossibility_check(game: StaticGame) -> ImpossibilityCheck:
    """序列博弈中只要某玩家多于两个行动，就不存在满足 C2 的行动。"""
    if game.n_players != 2:
        return ImpossibilityCheck(False, True, None, "only defined for 2-player games")
    if max(game.shape) <= 2:
        return ImpossibilityCheck(False, True, None, "every player has at most 2 actions")
    cls = classify(game)
    if not cls.serial:
        return ImpossibilityCheck(False, True, None, "game is not serial")
    for node, c in cls.actions.items():
        if c.c2:
            logger.error("[结构分析] 序列博弈中出现满足 C2 的行动 %s", c.label)
            return ImpossibilityCheck(True, False, c.label, "C2 action found")
    return ImpossibilityCheck(True, True, None, "no action satisfies C2")


def phi_partition_holds(game: StaticGame, tol: Optional[float] = None) -> bool:
    """每对不同的本方行动满足 φ(a,a′) = φ(a′,a) = ∅ 或 φ(a,a′) ∪ φ(a′,a) = A_{−i}。"""
    _require_two_players(game)
    for i in range(2):
        everything = frozenset(range(game.shape[1 - i]))
        for a, b in itertools.permutations(range(game.shape[i]), 2):
            forward, backward = phi(game, i, a, b, tol), phi(game, i, b, a, tol)
            if not ((not forward and not backward) or (forward | backward) == everything):
                return False
    return True
