"""perturbation_model.py
个体异质性（收益扰动 θ_i）分布模型，以及通过分布计算的各类概率质量。

支持三类分布（同一玩家内各坐标独立同分布，玩家之间相互独立）：
  1. extreme_value(λ)：坐标 CDF 为 F(x) = exp(−exp(−λx))；
  2. uniform_box(lo, hi)：每个坐标在 [lo, hi] 上均匀分布；
  3. empirical(samples)：有限样本的经验测度，平局偏向声明顺序靠前的行动。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import expit, logsumexp, softmax

from gameLAYER.static_game import (
    GameInputError,
    MixedProfile,
    PlayerRef,
    StaticGame,
    expected_payoffs,
)

logger = logging.getLogger(__name__)

EXTREME_VALUE = "extreme_value"
UNIFORM_BOX = "uniform_box"
EMPIRICAL = "empirical"
DISTRIBUTION_KINDS = (EXTREME_VALUE, UNIFORM_BOX, EMPIRICAL)

SeedLike = Union[None, int, np.random.Generator, np.random.SeedSequence]


@dataclass(frozen=True, eq=False)
class TypeDistribution:
    """玩家 i 的类型分布 p_i，定义在 Θ_i = R^{A_i} 上。"""

    kind: str
    player: str
    n_actions: int
    lam: Optional[float] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in DISTRIBUTION_KINDS:
            raise GameInputError(f"未知分布类型: {self.kind!r}")
        if self.kind == EXTREME_VALUE:
            if self.lam is None or not np.isfinite(self.lam) or self.lam <= 0:
                raise GameInputError(f"极值分布要求 λ > 0，得到 {self.lam}")
        elif self.kind == UNIFORM_BOX:
            if self.lo is None or self.hi is None or not (np.isfinite(self.lo) and np.isfinite(self.hi)):
                raise GameInputError("均匀分布需要有限的 lo 与 hi")
            if not self.lo < self.hi:
                raise GameInputError(f"均匀分布要求 lo < hi，得到 [{self.lo}, {self.hi}]")
        else:
            arr = np.array(self.samples, dtype=float) if self.samples is not None else np.empty((0, 0))
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise GameInputError("经验分布至少需要 1 个样本")
            if arr.shape[1] != self.n_actions:
                raise GameInputError(
                    f"经验分布样本维度为 {arr.shape[1]}，玩家 {self.player!r} 有 {self.n_actions} 个行动"
                )
            if not np.all(np.isfinite(arr)):
                raise GameInputError("经验分布样本必须为有限值")
            arr.setflags(write=False)
            object.__setattr__(self, "samples", arr)
        if self.n_actions < 2:
            raise GameInputError("类型向量至少需要 2 个坐标")

    @classmethod
    def extreme_value(cls, player: str, n_actions: int, lam: float) -> "TypeDistribution":
        return cls(EXTREME_VALUE, str(player), int(n_actions), lam=float(lam))

    @classmethod
    def uniform_box(cls, player: str, n_actions: int, lo: float, hi: float) -> "TypeDistribution":
        return cls(UNIFORM_BOX, str(player), int(n_actions), lo=float(lo), hi=float(hi))

    @classmethod
    def empirical(cls, player: str, samples) -> "TypeDistribution":
        arr = np.array(samples, dtype=float)
        n_actions = arr.shape[1] if arr.ndim == 2 else 0
        return cls(EMPIRICAL, str(player), int(n_actions), samples=arr)

    @property
    def width(self) -> float:
        return float(self.hi - self.lo)

    @property
    def is_iid(self) -> bool:
        return self.kind != EMPIRICAL

    def coordinate_cdf(self, x):
        """单个坐标的 CDF（仅独立同分布类型）。"""
        x = np.asarray(x, dtype=float)
        if self.kind == EXTREME_VALUE:
            return np.exp(-np.exp(-self.lam * x))
        if self.kind == UNIFORM_BOX:
            return np.clip((x - self.lo) / self.width, 0.0, 1.0)
        raise GameInputError("经验分布没有独立同分布的坐标 CDF")


@dataclass(frozen=True)
class ForcedRegionSpec:
    """多约束区域 {θ_i : θ_{i,a} − θ_{i,a′} ≥ t_{a′}, ∀ a′ ≠ a}。"""

    base_action: int
    thresholds: Mapping[int, float]

    def threshold_vector(self, n_actions: int) -> np.ndarray:
        """按行动下标排列的阈值（基准行动位置为 −∞）。"""
        keys = set(int(k) for k in self.thresholds)
        expected = set(range(n_actions)) - {self.base_action}
        if not 0 <= self.base_action < n_actions or keys != expected:
            raise GameInputError(
                f"阈值必须恰好覆盖除基准行动 {self.base_action} 外的全部行动，得到 {sorted(keys)}"
            )
        t = np.full(n_actions, -np.inf)
        for k, value in self.thresholds.items():
            value = float(value)
            if np.isnan(value) or value == np.inf:
                raise GameInputError(f"阈值必须为有限值或 −∞，得到 {value}")
            t[int(k)] = value
        return t


@dataclass(frozen=True)
class MonteCarloEstimate:
    """蒙特卡洛估计值及其标准误。"""

    value: float
    std_error: float
    samples: int


# ----------------------------------------------------------------------
# 抽样
# ----------------------------------------------------------------------
def _rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_types(dist: TypeDistribution, rng_seed_state: SeedLike, size: int) -> np.ndarray:
    """从 p_i 中抽取 ``size`` 个类型向量，返回形状 (size, |A_i|)。"""
    rng = _rng(rng_seed_state)
    k = dist.n_actions
    if dist.kind == EXTREME_VALUE:
        u = np.clip(rng.random((size, k)), np.finfo(float).tiny, None)
        # 逆 CDF：x = −ln(−ln u) / λ
        return -np.log(-np.log(u)) / dist.lam
    if dist.kind == UNIFORM_BOX:
        return dist.lo + dist.width * rng.random((size, k))
    idx = rng.integers(0, dist.samples.shape[0], size=size)
    return np.array(dist.samples[idx], dtype=float)


def sample_type(dist: TypeDistribution, rng_seed_state: SeedLike) -> np.ndarray:
    """从 p_i 中抽取一个类型向量 θ_i。"""
    return sample_types(dist, rng_seed_state, 1)[0]


# ----------------------------------------------------------------------
# 概率质量
# ----------------------------------------------------------------------
def pairwise_survival(dist: TypeDistribution, x, pair: Tuple[int, int] = (0, 1)):
    """P(θ_a − θ_{a′} ≥ x)。

    独立同分布类型与坐标无关；经验分布使用 ``pair`` 指定的两个坐标，
    边界上的样本只计入声明顺序靠前的行动：a 排在 a′ 之后时不等式取严格。
    ``x`` 可以是标量或数组。
    """
    xs = np.asarray(x, dtype=float)
    if dist.kind == EXTREME_VALUE:
        # 两个独立 Gumbel 之差服从 logistic 分布
        out = expit(-dist.lam * xs)
    elif dist.kind == UNIFORM_BOX:
        w = dist.width
        with np.errstate(invalid="ignore"):
            upper = (w - xs) ** 2 / (2.0 * w * w)
            lower = 1.0 - (w + xs) ** 2 / (2.0 * w * w)
        out = np.where(xs >= w, 0.0, np.where(xs <= -w, 1.0, np.where(xs >= 0.0, upper, lower)))
    else:
        a, b = pair
        diffs = np.sort(dist.samples[:, a] - dist.samples[:, b])
        n = diffs.size
        side = "left" if a < b else "right"
        out = (n - np.searchsorted(diffs, xs, side=side)) / n
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def _uniform_region_mass(dist: TypeDistribution, base: int, t: np.ndarray) -> float:
    """均匀分布下的区域质量：∫ f(y) Π_{a′} F(y − t_{a′}) dy。"""
    lo, hi, w = dist.lo, dist.hi, dist.width
    active = t[np.isfinite(t)]
    if active.size == 0:
        return 1.0

    def integrand(y: float) -> float:
        return float(np.prod(np.clip((y - active - lo) / w, 0.0, 1.0))) / w

    breaks = sorted({float(p) for s in active for p in (s + lo, s + hi) if lo < p < hi})
    value, _ = quad(integrand, lo, hi, points=breaks or None, limit=200, epsabs=1e-14, epsrel=1e-12)
    return float(np.clip(value, 0.0, 1.0))


def _forced_mask(theta: np.ndarray, base: int, t: np.ndarray) -> np.ndarray:
    """逐样本判断是否落在强制区域；对声明顺序靠前的对手行动取严格不等式。"""
    mask = np.ones(theta.shape[0], dtype=bool)
    for k in range(theta.shape[1]):
        if k == base:
            continue
        gap = theta[:, base] - theta[:, k]
        mask &= gap > t[k] if k < base else gap >= t[k]
    return mask


def forced_region_probability(
    dist: TypeDistribution,
    spec: ForcedRegionSpec,
    method: str = "auto",
    samples: Optional[int] = None,
    seed: SeedLike = None,
) -> float:
    """p_i({θ_i : θ_{i,a} − θ_{i,a′} ≥ t_{a′}, ∀ a′ ≠ a})。

    ``method="auto"``：两行动走 :func:`pairwise_survival`；多行动时极值分布用闭式
    1/(1+Σ e^{λ t})，均匀分布用一维求积，经验分布直接按样本计数。
    ``method="monte_carlo"``：按给定样本数与种子做蒙特卡洛积分。
    """
    t = spec.threshold_vector(dist.n_actions)
    base = spec.base_action
    rivals = [k for k in range(dist.n_actions) if k != base]
    if np.all(np.isneginf(t[rivals])):
        return 1.0
    if method == "monte_carlo":
        return monte_carlo_forced_region(dist, spec, samples, seed).value
    if method != "auto":
        raise GameInputError(f"未知积分方法: {method!r}")

    if dist.n_actions == 2:
        return float(pairwise_survival(dist, t[rivals[0]], pair=(base, rivals[0])))
    if dist.kind == EXTREME_VALUE:
        finite = t[rivals][np.isfinite(t[rivals])]
        return float(expit(-logsumexp(dist.lam * finite)))
    if dist.kind == UNIFORM_BOX:
        return _uniform_region_mass(dist, base, t)
    return float(np.mean(_forced_mask(dist.samples, base, t)))


def monte_carlo_forced_region(
    dist: TypeDistribution,
    spec: ForcedRegionSpec,
    samples: Optional[int],
    seed: SeedLike = None,
) -> MonteCarloEstimate:
    """蒙特卡洛估计区域质量，附标准误。"""
    if not samples or samples <= 0:
        raise GameInputError("蒙特卡洛积分需要正的样本数")
    t = spec.threshold_vector(dist.n_actions)
    base = spec.base_action
    theta = sample_types(dist, seed, int(samples))
    mask = _forced_mask(theta, base, t)
    p = float(np.mean(mask))
    return MonteCarloEstimate(p, float(np.sqrt(p * (1.0 - p) / samples)), int(samples))


def choice_probabilities(dist: TypeDistribution, utilities: np.ndarray) -> np.ndarray:
    """给定各行动的期望收益，计算 a ↦ p_i(E_{i,a})。"""
    u = np.asarray(utilities, dtype=float)
    if u.size != dist.n_actions:
        raise GameInputError(f"收益向量长度 {u.size} 与分布维度 {dist.n_actions} 不一致")
    if dist.kind == EXTREME_VALUE:
        return softmax(dist.lam * u)
    if dist.kind == EMPIRICAL:
        choice = np.argmax(dist.samples + u, axis=1)
        return np.bincount(choice, minlength=u.size) / dist.samples.shape[0]
    if u.size == 2:
        p0 = pairwise_survival(dist, u[1] - u[0])
        return np.array([p0, 1.0 - p0])
    probs = np.array([
        _uniform_region_mass(dist, a, np.where(np.arange(u.size) == a, -np.inf, u - u[a]))
        for a in range(u.size)
    ])
    return probs / probs.sum()


def monte_carlo_response(
    dist: TypeDistribution,
    utilities: np.ndarray,
    samples: Optional[int],
    seed: SeedLike = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """抽样统计 argmax(u + θ) 的频率，返回 (概率, 标准误)。"""
    if not samples or samples <= 0:
        raise GameInputError("蒙特卡洛量化响应需要正的样本数")
    u = np.asarray(utilities, dtype=float)
    theta = sample_types(dist, seed, int(samples))
    choice = np.argmax(theta + u, axis=1)
    p = np.bincount(choice, minlength=u.size) / samples
    return p, np.sqrt(p * (1.0 - p) / samples)


def quantal_response(
    dist: TypeDistribution,
    game: StaticGame,
    player: PlayerRef,
    opponents: MixedProfile,
    method: str = "auto",
    samples: Optional[int] = None,
    seed: SeedLike = None,
) -> np.ndarray:
    """量化响应：对手组合 π_{−i} 下每个行动成为最优反应的类型质量。"""
    i = game.player_index(player)
    u = expected_payoffs(game, i, opponents)
    if method == "monte_carlo":
        return monte_carlo_response(dist, u, samples, seed)[0]
    if method != "auto":
        raise GameInputError(f"未知积分方法: {method!r}")
    return choice_probabilities(dist, u)
