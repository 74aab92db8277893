"""population_sim.py
群体博弈的蒙特卡洛模拟：每轮从各群体抽取个体，个体对信念做最优反应，统计行动频率。

信念模式
------------------------------------------------
• fixed：每轮使用同一个给定信念（一次性观测）；
• empirical_lag：第 r 轮的信念为第 r−1 轮的原始经验频率（反复博弈，不做平均）。

同一轮内按固定大小的块抽样，每块使用 SeedSequence([seed, round, player]) 派生的子流，
因此结果与线程数无关。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from config.config_manager import get_config_manager
from config.performance_manager import get_performance_manager
from gameLAYER.static_game import GameInputError, MixedProfile, PlayerRef, StaticGame, expected_payoffs
from modelLAYER.perturbation_model import TypeDistribution, choice_probabilities, sample_types
from modelLAYER.qre_model import check_distributions
from rationalLAYER.procedure import DistributionVerdict, ProcedureTrace, check_distribution

logger = logging.getLogger(__name__)

FIXED = "fixed"
EMPIRICAL_LAG = "empirical_lag"


@dataclass(frozen=True)
class SimulationConfig:
    agents_per_round: int
    rounds: int = 1
    seed: int = 0
    belief_mode: str = FIXED
    belief: Optional[MixedProfile] = None
    chunk_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.agents_per_round < 1:
            raise GameInputError(f"每轮个体数至少为 1，得到 {self.agents_per_round}")
        if self.rounds < 1:
            raise GameInputError(f"轮数至少为 1，得到 {self.rounds}")
        if self.belief_mode not in (FIXED, EMPIRICAL_LAG):
            raise GameInputError(f"未知信念模式: {self.belief_mode!r}")
        if self.belief_mode == FIXED and self.belief is None:
            raise GameInputError("fixed 模式需要给定信念")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise GameInputError("抽样块大小至少为 1")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    belief: MixedProfile
    counts: List[np.ndarray]
    cumulative_counts: List[np.ndarray]
    analytic: List[np.ndarray]

    @property
    def agents(self) -> int:
        return int(self.counts[0].sum())

    def frequencies(self, i: int) -> np.ndarray:
        return self.counts[i] / self.counts[i].sum()

    def cumulative(self, i: int) -> np.ndarray:
        return self.cumulative_counts[i] / self.cumulative_counts[i].sum()

    def deviation(self, i: int) -> np.ndarray:
        return self.frequencies(i) - self.analytic[i]


@dataclass(frozen=True)
class SimulationTrace:
    players: tuple
    actions: tuple
    config: SimulationConfig
    records: List[RoundRecord] = field(repr=False)

    def cumulative_profile(self, round_index: int = -1) -> MixedProfile:
        """截至某轮的累计经验分布（即轮均频率）。"""
        record = self.records[round_index]
        return MixedProfile(tuple(record.cumulative(i) for i in range(len(self.players))))

    def round_profile(self, round_index: int = -1) -> MixedProfile:
        record = self.records[round_index]
        return MixedProfile(tuple(record.frequencies(i) for i in range(len(self.players))))

    def to_frame(self) -> pd.DataFrame:
        """导出为长表：round, player, action, frequency, analytic_frequency, deviation。"""
        rows = []
        for record in self.records:
            for i, player in enumerate(self.players):
                freq, analytic = record.frequencies(i), record.analytic[i]
                for a, action in enumerate(self.actions[i]):
                    rows.append((record.round, player, action, float(freq[a]), float(analytic[a]),
                                 float(freq[a] - analytic[a])))
        return pd.DataFrame(
            rows, columns=["round", "player", "action", "frequency", "analytic_frequency", "deviation"]
        )


def best_response(game: StaticGame, player: PlayerRef, theta: np.ndarray, belief: MixedProfile) -> int:
    """argmax_{a_i} u_i(a_i, belief_{−i}) + θ_{i,a_i}，平局取声明顺序靠前的行动。"""
    i = game.player_index(player)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (game.shape[i],):
        raise GameInputError(f"类型向量长度 {theta.size} 与行动数 {game.shape[i]} 不一致")
    return int(np.argmax(expected_payoffs(game, i, belief) + theta))


def _tally(dist: TypeDistribution, utilities: np.ndarray, seeds: Sequence[np.random.SeedSequence],
           agents: int, chunk: int) -> np.ndarray:
    sizes = [min(chunk, agents - k * chunk) for k in range(len(seeds))]

    def run(task):
        seed, size = task
        theta = sample_types(dist, seed, size)
        return np.bincount(np.argmax(theta + utilities, axis=1), minlength=utilities.size)

    parts = get_performance_manager().map_ordered(run, list(zip(seeds, sizes)))
    return np.sum(parts, axis=0)


def simulate(game: StaticGame, dists: Sequence[TypeDistribution], config: SimulationConfig) -> SimulationTrace:
    """逐轮抽样、最优反应并统计；给定种子时结果逐位可复现。"""
    check_distributions(game, dists)
    chunk = int(config.chunk_size or get_config_manager().get("simulation", "chunk_size"))
    belief = config.belief if config.belief is not None else MixedProfile.uniform(game)
    if not belief.matches(game):
        raise GameInputError("信念与博弈规模不一致")
    n_chunks = -(-config.agents_per_round // chunk)

    perf = get_performance_manager()
    t0 = perf.start_timer()
    records: List[RoundRecord] = []
    cumulative = [np.zeros(k, dtype=np.int64) for k in game.shape]
    for r in range(config.rounds):
        counts, analytic = [], []
        for i in range(game.n_players):
            u = expected_payoffs(game, i, belief)
            seeds = np.random.SeedSequence([int(config.seed), r, i]).spawn(n_chunks)
            tally = _tally(dists[i], u, seeds, config.agents_per_round, chunk).astype(np.int64)
            counts.append(tally)
            analytic.append(choice_probabilities(dists[i], u))
            cumulative[i] = cumulative[i] + tally
        records.append(RoundRecord(r, belief, counts, [c.copy() for c in cumulative], analytic))
        if config.belief_mode == EMPIRICAL_LAG:
            belief = MixedProfile(tuple(c / c.sum() for c in counts))
        logger.debug("[群体模拟] 第 %d 轮完成", r)
    perf.end_timer(t0, "群体模拟")
    logger.info("[群体模拟] %d 轮 × %d 个体完成", config.rounds, config.agents_per_round)
    return SimulationTrace(game.players, game.actions, config, records)


@dataclass(frozen=True)
class ObservedRound:
    round: int
    passed: bool
    verdicts: List[DistributionVerdict]

    @property
    def binding(self) -> DistributionVerdict:
        return min(self.verdicts, key=lambda v: v.margin)


def test_observed(trace: SimulationTrace, proc: ProcedureTrace, z: Optional[float] = None) -> List[ObservedRound]:
    """逐轮检查累计经验分布是否满足极限下界。

    容许量为 1e−9 加上 z·sqrt(q(1−q)/n)，n 为截至该轮的累计个体数。
    """
    if tuple(trace.actions) != tuple(proc.actions):
        raise GameInputError("模拟轨迹与过程轨迹的博弈不一致")
    z = float(get_config_manager().get("simulation", "z_score") if z is None else z)
    report = []
    for k, record in enumerate(trace.records):
        n = record.agents * (k + 1)
        allowance = [z * np.sqrt(q * (1.0 - q) / n) for q in proc.limit.q]
        verdicts = check_distribution(trace.cumulative_profile(k), proc, allowance=allowance)
        report.append(ObservedRound(record.round, all(v.passed for v in verdicts), verdicts))
    return report


# 不是测试函数
test_observed.__test__ = False
