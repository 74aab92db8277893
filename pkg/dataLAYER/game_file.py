"""game_file.py
博弈文件（JSON）的模式定义与解析。

文件结构::

    {
      "players": [
        {"name": "1", "actions": ["NV", "V"],
         "distribution": {"kind": "extreme_value", "lambda": 0.5}},
        ...
      ],
      "payoffs": [ <玩家 1 的嵌套数组>, <玩家 2 的嵌套数组>, ... ]
    }

未知字段一律拒绝；模式或博弈不变量不满足时抛出 :class:`GameFileError`。
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from gameLAYER.static_game import GameInputError, StaticGame, validate_game
from modelLAYER.perturbation_model import TypeDistribution


class GameFileError(ValueError):
    """博弈文件无法解析，附带行列位置与诊断列表。"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 diagnostics: Optional[Sequence[str]] = None):
        self.line = line
        self.column = column
        self.diagnostics = list(diagnostics or [])
        location = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(location + message)


class DistributionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: Literal["extreme_value", "uniform_box", "empirical"]
    lam: Optional[float] = Field(default=None, alias="lambda")
    lo: Optional[float] = None
    hi: Optional[float] = None
    samples: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _fields_match_kind(self) -> "DistributionSpec":
        required = {
            "extreme_value": {"lam"},
            "uniform_box": {"lo", "hi"},
            "empirical": {"samples"},
        }[self.kind]
        present = {name for name in ("lam", "lo", "hi", "samples") if getattr(self, name) is not None}
        missing = required - present
        extra = present - required
        if missing:
            raise ValueError(f"{self.kind} requires {', '.join(sorted(_public(m) for m in missing))}")
        if extra:
            raise ValueError(f"{self.kind} does not take {', '.join(sorted(_public(e) for e in extra))}")
        if self.samples is not None and len({len(row) for row in self.samples}) > 1:
            raise ValueError("empirical samples must all have the same length")
        return self


def _public(name: str) -> str:
    return "lambda" if name == "lam" else name


class PlayerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    actions: List[str]
    distribution: DistributionSpec


class GameFileModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    players: List[PlayerSpec]
    payoffs: List[Any]

    @field_validator("payoffs")
    @classmethod
    def _payoffs_are_numbers(cls, value: List[Any]) -> List[Any]:
        _check_numeric(value, "payoffs")
        return value


def _check_numeric(node: Any, path: str) -> None:
    if isinstance(node, list):
        for k, child in enumerate(node):
            _check_numeric(child, f"{path}[{k}]")
    elif isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ValueError(f"{path} must be a number, got {node!r}")


@dataclass(frozen=True)
class GameDefinition:
    """解析结果：博弈 ⟨G, Θ, p⟩。"""

    game: StaticGame
    dists: Tuple[TypeDistribution, ...]
    source: str = "<string>"


def _locate(text: str, loc: Sequence[Any]) -> Tuple[Optional[int], Optional[int]]:
    """按错误路径中最后一个字段名在原文中的首次出现位置估计行列号。"""
    for key in reversed(list(loc)):
        if isinstance(key, str):
            match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
            if match:
                before = text[:match.start()]
                return before.count("\n") + 1, match.start() - (before.rfind("\n") + 1) + 1
    return None, None


def _build_distribution(player: PlayerSpec) -> TypeDistribution:
    spec = player.distribution
    k = len(player.actions)
    if spec.kind == "extreme_value":
        return TypeDistribution.extreme_value(player.name, k, spec.lam)
    if spec.kind == "uniform_box":
        return TypeDistribution.uniform_box(player.name, k, spec.lo, spec.hi)
    dist = TypeDistribution.empirical(player.name, spec.samples)
    if dist.n_actions != k:
        raise GameInputError(f"经验分布样本维度为 {dist.n_actions}，玩家 {player.name!r} 有 {k} 个行动")
    return dist


def parse_game(text: str, source: str = "<string>") -> GameDefinition:
    """把 JSON 文本解析为博弈与类型分布。"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFileError(f"{source}: {exc.msg}", exc.lineno, exc.colno, [exc.msg]) from exc

    try:
        model = GameFileModel.model_validate(data)
    except ValidationError as exc:
        diagnostics = [
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        ]
        line, column = _locate(text, exc.errors()[0]["loc"])
        raise GameFileError(f"{source}: schema violation: {diagnostics[0]}", line, column, diagnostics) from exc

    game = StaticGame.from_nested(
        [p.name for p in model.players],
        [p.actions for p in model.players],
        model.payoffs,
    )
    problems = validate_game(game)
    if problems:
        line, column = _locate(text, ["payoffs"]) if any("payoff" in p for p in problems) else (None, None)
        raise GameFileError(f"{source}: invalid game: {problems[0]}", line, column, problems)

    try:
        dists = tuple(_build_distribution(p) for p in model.players)
    except GameInputError as exc:
        line, column = _locate(text, ["distribution"])
        raise GameFileError(f"{source}: invalid distribution: {exc}", line, column, [str(exc)]) from exc
    return GameDefinition(game, dists, source)
