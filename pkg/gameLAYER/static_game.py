"""static_game.py
有限标准型博弈的表示、期望收益与收益差统计。

约定
------------------------------------------------
• 玩家与行动均用字符串标识；行动的声明顺序同时作为打破平局的线性序。
• ``payoff[i]`` 是以完整行动组合为下标的张量，形状为 ``(|A_1|, …, |A_n|)``；
  缺失的条目用 NaN 表示，由 :func:`validate_game` 报告。
• 对手信念在多于两名玩家时取乘积测度（对手之间相互独立）。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, List, Sequence, Tuple, Union

import numpy as np

PlayerRef = Union[int, str]
ActionRef = Union[int, str]


class GameInputError(ValueError):
    """输入不合法：未知玩家/行动、参数越界等。"""


class UnsupportedShapeError(GameInputError):
    """运算不支持当前博弈规模（例如要求 2x2）。"""


@dataclass(frozen=True, eq=False)
class StaticGame:
    """有限标准型博弈 ⟨I, (A_j, u_j)⟩。"""

    players: Tuple[str, ...]
    actions: Tuple[Tuple[str, ...], ...]
    payoffs: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "players", tuple(str(p) for p in self.players))
        object.__setattr__(self, "actions", tuple(tuple(str(a) for a in acts) for acts in self.actions))
        tensors = []
        for tensor in self.payoffs:
            arr = np.array(tensor, dtype=float)
            arr.setflags(write=False)
            tensors.append(arr)
        object.__setattr__(self, "payoffs", tuple(tensors))

    # ------------------------------------------------------------------
    # 构造
    # ------------------------------------------------------------------
    @classmethod
    def from_nested(
        cls,
        players: Sequence[str],
        actions: Sequence[Sequence[str]],
        payoffs: Sequence[Any],
    ) -> "StaticGame":
        """由嵌套列表构造博弈，缺失条目记为 NaN。"""
        shape = tuple(len(a) for a in actions)
        tensors = [nested_to_tensor(p, shape) for p in payoffs]
        return cls(tuple(players), tuple(tuple(a) for a in actions), tuple(tensors))

    @classmethod
    def bimatrix(
        cls,
        row_payoffs: Sequence[Sequence[float]],
        col_payoffs: Sequence[Sequence[float]],
        row_actions: Sequence[str],
        col_actions: Sequence[str],
        players: Sequence[str] = ("1", "2"),
    ) -> "StaticGame":
        """两人博弈的快捷构造：行为玩家 1，列为玩家 2。"""
        return cls.from_nested(players, [row_actions, col_actions], [row_payoffs, col_payoffs])

    # ------------------------------------------------------------------
    # 属性与下标解析
    # ------------------------------------------------------------------
    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    def is_2x2(self) -> bool:
        return self.shape == (2, 2)

    def player_index(self, player: PlayerRef) -> int:
        if isinstance(player, (int, np.integer)) and not isinstance(player, bool):
            if 0 <= int(player) < self.n_players:
                return int(player)
            raise GameInputError(f"未知玩家下标: {player}")
        try:
            return self.players.index(str(player))
        except ValueError:
            raise GameInputError(f"未知玩家: {player!r}") from None

    def action_index(self, player: PlayerRef, action: ActionRef) -> int:
        i = self.player_index(player)
        acts = self.actions[i]
        if isinstance(action, (int, np.integer)) and not isinstance(action, bool):
            if 0 <= int(action) < len(acts):
                return int(action)
            raise GameInputError(f"玩家 {self.players[i]!r} 没有下标为 {action} 的行动")
        try:
            return acts.index(str(action))
        except ValueError:
            raise GameInputError(f"玩家 {self.players[i]!r} 没有行动 {action!r}") from None

    def opponents(self, player: PlayerRef) -> List[int]:
        i = self.player_index(player)
        return [j for j in range(self.n_players) if j != i]

    def node_label(self, player: PlayerRef, action: ActionRef) -> str:
        """图输出中的节点名，如 ``NV1``。"""
        i = self.player_index(player)
        return f"{self.actions[i][self.action_index(i, action)]}{i + 1}"

    def action_slice(self, player: PlayerRef, action: ActionRef) -> np.ndarray:
        """u_i(a_i, ·)：对手行动组合上的收益张量。"""
        i = self.player_index(player)
        a = self.action_index(i, action)
        return np.take(self.payoffs[i], a, axis=i)


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """混合行动组合 π = (π_j)，每个玩家一个概率向量。"""

    dist: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        vectors = []
        for k, vec in enumerate(self.dist):
            arr = np.array(vec, dtype=float).reshape(-1)
            if arr.size == 0 or not np.all(np.isfinite(arr)):
                raise GameInputError(f"第 {k + 1} 个分布包含非有限值或为空")
            if np.any(arr < -1e-12):
                raise GameInputError(f"第 {k + 1} 个分布存在负概率: {arr}")
            total = float(arr.sum())
            if abs(total - 1.0) > 1e-9:
                raise GameInputError(f"第 {k + 1} 个分布之和为 {total}，应为 1")
            arr = np.clip(arr, 0.0, None) / np.clip(arr, 0.0, None).sum()
            arr.setflags(write=False)
            vectors.append(arr)
        object.__setattr__(self, "dist", tuple(vectors))

    @classmethod
    def uniform(cls, game: StaticGame) -> "MixedProfile":
        return cls(tuple(np.full(k, 1.0 / k) for k in game.shape))

    @classmethod
    def pure(cls, game: StaticGame, actions: Sequence[ActionRef]) -> "MixedProfile":
        vecs = []
        for i, a in enumerate(actions):
            v = np.zeros(game.shape[i])
            v[game.action_index(i, a)] = 1.0
            vecs.append(v)
        return cls(tuple(vecs))

    def __getitem__(self, i: int) -> np.ndarray:
        return self.dist[i]

    def __len__(self) -> int:
        return len(self.dist)

    def as_array(self) -> np.ndarray:
        return np.concatenate(self.dist)

    def sup_distance(self, other: "MixedProfile") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))

    def matches(self, game: StaticGame) -> bool:
        return tuple(v.size for v in self.dist) == game.shape


@dataclass(frozen=True)
class PayoffGap:
    """H̄ / H̲：对手行动组合上收益差的最大值与最小值。"""

    upper: float
    lower: float


# ----------------------------------------------------------------------
# 运算
# ----------------------------------------------------------------------
def _contract_opponents(tensor: np.ndarray, game: StaticGame, i: int, opponents: MixedProfile) -> np.ndarray:
    """把去掉玩家 i 轴之后的张量按对手分布逐一收缩（乘积测度）。"""
    if len(opponents) != game.n_players or not opponents.matches(game):
        raise GameInputError("对手分布与博弈规模不一致")
    result = tensor
    for j in reversed(game.opponents(i)):
        result = np.tensordot(result, opponents[j], axes=([result.ndim - 1], [0]))
    return result


def expected_payoff(game: StaticGame, player: PlayerRef, action: ActionRef, opponents: MixedProfile) -> float:
    """u_i(a_i, π_{−i})：对手行动组合上的期望收益。

    ``opponents`` 是完整的混合组合，玩家 i 自己的分量被忽略。
    """
    i = game.player_index(player)
    tensor = game.action_slice(i, action)
    return float(_contract_opponents(tensor, game, i, opponents))


def expected_payoffs(game: StaticGame, player: PlayerRef, opponents: MixedProfile) -> np.ndarray:
    """u_i(·, π_{−i})：对玩家 i 的每个行动求期望收益。"""
    i = game.player_index(player)
    # 移轴后剩余轴仍按对手顺序排列
    tensor = np.moveaxis(game.payoffs[i], i, 0)
    return np.asarray(_contract_opponents(tensor, game, i, opponents), dtype=float)


def payoff_difference(game: StaticGame, player: PlayerRef, action: ActionRef, rival: ActionRef) -> np.ndarray:
    """u_i(a_i′, ·) − u_i(a_i, ·)，定义在对手行动组合上。"""
    i = game.player_index(player)
    a = game.action_index(i, action)
    b = game.action_index(i, rival)
    if a == b:
        raise GameInputError("收益差要求两个不同的行动")
    return game.action_slice(i, b) - game.action_slice(i, a)


def payoff_gap(game: StaticGame, player: PlayerRef, action: ActionRef, rival: ActionRef) -> PayoffGap:
    diff = payoff_difference(game, player, action, rival)
    return PayoffGap(upper=float(np.max(diff)), lower=float(np.min(diff)))


def validate_game(game: StaticGame) -> List[str]:
    """检查 StaticGame 的全部不变量，返回违规说明列表（空列表表示合法）。"""
    problems: List[str] = []
    if game.n_players < 2:
        problems.append(f"game needs at least 2 players (got {game.n_players})")
    if len(game.actions) != game.n_players:
        problems.append("every player needs an action list")
    for name, acts in zip(game.players, game.actions):
        if len(acts) < 2:
            problems.append(f"player '{name}' needs ≥ 2 actions")
        if len(set(acts)) != len(acts):
            problems.append(f"player '{name}' has duplicate action names")
    if len(set(game.players)) != len(game.players):
        problems.append("duplicate player names")
    if len(game.payoffs) != game.n_players:
        problems.append(f"expected {game.n_players} payoff tensors, got {len(game.payoffs)}")
    for name, tensor in zip(game.players, game.payoffs):
        if tensor.shape != game.shape or np.any(np.isnan(tensor)):
            problems.append(f"payoff tensor not total for player '{name}'")
        elif not np.all(np.isfinite(tensor)):
            problems.append(f"payoff entries must be finite for player '{name}'")
    return problems


def nested_to_tensor(nested: Any, shape: Tuple[int, ...]) -> np.ndarray:
    """把嵌套列表展开为给定形状的张量；缺失或多余的条目使张量不完整（NaN）。"""
    tensor = np.full(shape, np.nan)
    for index in np.ndindex(*shape):
        node = nested
        try:
            for k in index:
                node = node[k]
            if isinstance(node, (bool, np.bool_, str, bytes)):
                continue
            value = float(node)
        except (IndexError, KeyError, TypeError, ValueError):
            continue
        tensor[index] = value
    if _has_extra_entries(nested, shape):
        # 多余条目同样视为收益张量与行动集不一致
        tensor.flat[0] = np.nan
    return tensor


def _has_extra_entries(nested: Any, shape: Tuple[int, ...]) -> bool:
    if not shape:
        return isinstance(nested, (list, tuple))
    if not isinstance(nested, (list, tuple, np.ndarray)):
        return False
    if len(nested) > shape[0]:
        return True
    return any(_has_extra_entries(child, shape[1:]) for child in nested)
