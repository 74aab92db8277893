"""
博弈层，包含标准型博弈、混合行动组合与收益差统计。
"""

from .static_game import (
    GameInputError,
    MixedProfile,
    PayoffGap,
    StaticGame,
    UnsupportedShapeError,
    expected_payoff,
    expected_payoffs,
    payoff_difference,
    payoff_gap,
    validate_game,
)

__all__ = [
    "GameInputError",
    "MixedProfile",
    "PayoffGap",
    "StaticGame",
    "UnsupportedShapeError",
    "expected_payoff",
    "expected_payoffs",
    "payoff_difference",
    "payoff_gap",
    "validate_game",
]
