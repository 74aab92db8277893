"""qre_model.py
结构型 QRE 的不动点求解、2x2 博弈的完整枚举与下包络。

QRE 是映射 π ↦ (p_i(E_{i,a_i}(π)))_{i,a_i} 的不动点。
  • solve_fixed_point：阻尼迭代 π ← (1−d)·π + d·qre_map(π)；
  • enumerate_qre_2x2：化为标量方程 r = g₁(g₂(r))，网格扫描 + 二分；
  • solve_multistart：大于 2x2 时的 Sobol 多起点求解（不保证完备）。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect
from scipy.stats import qmc

from config.config_manager import get_config_manager
from config.performance_manager import get_performance_manager
from gameLAYER.static_game import GameInputError, MixedProfile, StaticGame, UnsupportedShapeError

from .perturbation_model import TypeDistribution, pairwise_survival, quantal_response

logger = logging.getLogger(__name__)

# 枚举得到的根在剩余误差不超过该值时视为 QRE
ENUMERATION_RESIDUAL_TOL = 1e-9
ROOT_XTOL = 1e-12
ROOT_DEDUP = 1e-9
MULTISTART_DEDUP = 1e-6
DIVERGENCE_FACTOR = 10.0
STALL_WINDOW = 50
STALL_PROGRESS = 0.99
MIN_DAMPING = 1e-3


@dataclass(frozen=True)
class QreResult:
    """一个 QRE 候选：组合、残差 sup|π − qre_map(π)|、迭代次数与收敛标志。"""

    profile: MixedProfile
    residual: float
    iterations: int
    converged: bool
    method: str = "fixed_point"


@dataclass(frozen=True)
class LowerEnvelope:
    """下包络 π̲_{i,a_i}：在给定 QRE 列表上逐坐标取最小值。"""

    value: Tuple[np.ndarray, ...]
    count: int
    complete: bool
    note: str = ""

    def __getitem__(self, i: int) -> np.ndarray:
        return self.value[i]


def check_distributions(game: StaticGame, dists: Sequence[TypeDistribution]) -> None:
    """确认每个玩家恰有一个维度匹配的类型分布。"""
    if len(dists) != game.n_players:
        raise GameInputError(f"需要 {game.n_players} 个类型分布，得到 {len(dists)} 个")
    for k, (dist, size) in enumerate(zip(dists, game.shape)):
        if dist.n_actions != size:
            raise GameInputError(
                f"玩家 {game.players[k]!r} 的类型分布维度 {dist.n_actions} 与行动数 {size} 不一致"
            )


def qre_map(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    profile: MixedProfile,
    method: str = "auto",
    samples: Optional[int] = None,
    seed=None,
) -> MixedProfile:
    """对每个玩家在 π_{−i} 下应用量化响应。"""
    check_distributions(game, dists)
    return MixedProfile(tuple(
        quantal_response(dists[i], game, i, profile, method=method, samples=samples, seed=seed)
        for i in range(game.n_players)
    ))


def qre_residual(game: StaticGame, dists: Sequence[TypeDistribution], profile: MixedProfile) -> float:
    """sup|π − qre_map(π)|。"""
    return profile.sup_distance(qre_map(game, dists, profile))


def solve_fixed_point(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    start: Optional[MixedProfile] = None,
    damping: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> QreResult:
    """阻尼不动点迭代；未收敛时如实报告残差，不抛异常。

    残差超过历史最优的 10 倍，或连续 50 次迭代残差都没有比上一个参照值低 1% 以上时，阻尼减半
    （下限 1e−3），并从最优点继续。阻尼过大时迭代会落入极限环，残差停在一个常数附近。
    """
    cfg = get_config_manager()
    damping = cfg.get("qre", "damping") if damping is None else damping
    tol = cfg.get("qre", "tol") if tol is None else tol
    max_iter = cfg.get("qre", "max_iter") if max_iter is None else max_iter
    if not 0.0 < damping <= 1.0:
        raise GameInputError(f"阻尼系数必须在 (0, 1] 内，得到 {damping}")
    if tol <= 0:
        raise GameInputError(f"容差必须为正，得到 {tol}")
    check_distributions(game, dists)

    current = start if start is not None else MixedProfile.uniform(game)
    if not current.matches(game):
        raise GameInputError("初始组合与博弈规模不一致")

    residual = np.inf
    best, best_residual = current, np.inf
    anchor, stalled = np.inf, 0
    for iteration in range(int(max_iter) + 1):
        image = qre_map(game, dists, current)
        residual = current.sup_distance(image)
        if residual <= tol:
            logger.debug("[QRE求解] 第 %d 次迭代收敛，残差 %.3e", iteration, residual)
            return QreResult(current, residual, iteration, True)
        if residual < STALL_PROGRESS * anchor:
            anchor, stalled = residual, 0
        else:
            stalled += 1
        if residual < best_residual:
            best, best_residual = current, residual
        diverging = residual > DIVERGENCE_FACTOR * best_residual
        if (diverging or stalled >= STALL_WINDOW) and damping > MIN_DAMPING:
            # 发散或停滞：阻尼减半并从最优点重新开始
            damping = max(MIN_DAMPING, damping / 2.0)
            anchor, stalled = best_residual, 0
            logger.debug("[QRE求解] 残差 %.3e 未改善，阻尼降为 %.4g", residual, damping)
            current = best
            image = qre_map(game, dists, current)
        if iteration == max_iter:
            break
        current = MixedProfile(tuple(
            (1.0 - damping) * old + damping * new for old, new in zip(current.dist, image.dist)
        ))

    logger.warning("[QRE求解] 达到最大迭代次数 %d 仍未收敛，残差 %.3e", max_iter, residual)
    return QreResult(current, float(residual), int(max_iter), False)


# ----------------------------------------------------------------------
# 2x2 枚举
# ----------------------------------------------------------------------
def _scalar_responses(game: StaticGame, dists: Sequence[TypeDistribution]):
    """返回 g₂(r) 与 g₁(s)：对手选第一个行动的概率 ↦ 本方选第一个行动的概率。"""
    u1, u2 = game.payoffs

    def g2(r):
        # 玩家 2 第二个行动相对第一个行动的期望收益差
        diff = r * (u2[0, 1] - u2[0, 0]) + (1.0 - r) * (u2[1, 1] - u2[1, 0])
        return pairwise_survival(dists[1], diff, pair=(0, 1))

    def g1(s):
        diff = s * (u1[1, 0] - u1[0, 0]) + (1.0 - s) * (u1[1, 1] - u1[0, 1])
        return pairwise_survival(dists[0], diff, pair=(0, 1))

    return g1, g2


def _suspicious_cells(h: np.ndarray) -> bool:
    """网格上未变号的局部极小 |h| 可能藏有同一格内的一对根。"""
    mid = np.abs(h[1:-1])
    left, right = np.abs(h[:-2]), np.abs(h[2:])
    same_sign = (np.sign(h[:-2]) == np.sign(h[1:-1])) & (np.sign(h[2:]) == np.sign(h[1:-1]))
    dip = (mid < left) & (mid < right) & (mid <= np.abs(h[:-2] - h[1:-1]) + np.abs(h[2:] - h[1:-1]))
    return bool(np.any(same_sign & dip & (mid > 0)))


def _scan_roots(h, grid: int) -> Tuple[List[float], np.ndarray]:
    r = np.linspace(0.0, 1.0, grid + 1)
    values = h(r)
    roots = [float(x) for x in r[values == 0.0]]
    for k in np.nonzero(values[:-1] * values[1:] < 0)[0]:
        roots.append(float(bisect(h, r[k], r[k + 1], xtol=ROOT_XTOL, maxiter=200)))
    roots.sort()
    unique: List[float] = []
    for root in roots:
        if not unique or root - unique[-1] > ROOT_DEDUP:
            unique.append(root)
    return unique, values


def enumerate_qre_2x2(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    grid: Optional[int] = None,
    max_grid: Optional[int] = None,
) -> List[QreResult]:
    """枚举 2x2 博弈的全部 QRE。

    以 r = π₁(第一个行动) 为未知量求解 r = g₁(g₂(r))；在均匀网格上扫描变号区间，
    每个区间二分到 1e−12，间距小于 1e−9 的根合并。若发现可能藏有成对根的网格单元，
    网格加倍直至 ``max_grid``。
    """
    if game.n_players != 2 or not game.is_2x2():
        raise UnsupportedShapeError(f"QRE 枚举只支持 2x2 博弈，当前规模 {game.shape}")
    cfg = get_config_manager()
    grid = int(cfg.get("qre", "grid") if grid is None else grid)
    max_grid = int(cfg.get("qre", "max_grid") if max_grid is None else max_grid)
    if grid < 100:
        raise GameInputError(f"枚举网格至少为 100，得到 {grid}")
    check_distributions(game, dists)

    g1, g2 = _scalar_responses(game, dists)

    def h(r):
        return r - g1(g2(r))

    roots, values = _scan_roots(h, grid)
    while _suspicious_cells(values) and grid * 2 <= max(max_grid, grid):
        grid *= 2
        logger.debug("[QRE枚举] 网格加倍至 %d", grid)
        roots, values = _scan_roots(h, grid)
    if _suspicious_cells(values):
        logger.warning("[QRE枚举] 网格 %d 上仍有未分离的近零点，结果可能不完整", grid)

    results = []
    for r in roots:
        r = float(np.clip(r, 0.0, 1.0))
        s = float(np.clip(g2(r), 0.0, 1.0))
        profile = MixedProfile((np.array([r, 1.0 - r]), np.array([s, 1.0 - s])))
        residual = qre_residual(game, dists, profile)
        results.append(QreResult(profile, residual, grid, residual <= ENUMERATION_RESIDUAL_TOL, "enumeration"))
    logger.info("[QRE枚举] 网格 %d，找到 %d 个 QRE", grid, len(results))
    return results


# ----------------------------------------------------------------------
# 多起点
# ----------------------------------------------------------------------
def sobol_starts(game: StaticGame, count: int, seed=None) -> List[MixedProfile]:
    """Sobol 点经 −log(1−u) 归一化映射到各玩家的单纯形上。"""
    dim = int(sum(game.shape))
    points = qmc.Sobol(d=dim, scramble=True, seed=seed).random(count)
    starts = []
    for point in points:
        weights = -np.log1p(-np.clip(point, 0.0, 1.0 - 1e-12)) + 1e-12
        vecs, offset = [], 0
        for k in game.shape:
            block = weights[offset:offset + k]
            vecs.append(block / block.sum())
            offset += k
        starts.append(MixedProfile(tuple(vecs)))
    return starts


def solve_multistart(
    game: StaticGame,
    dists: Sequence[TypeDistribution],
    starts: Optional[int] = None,
    damping: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    seed=None,
) -> List[QreResult]:
    """从多个 Sobol 起点独立求解并按起点序号确定性合并去重。

    返回的集合不保证包含全部 QRE。
    """
    cfg = get_config_manager()
    starts = int(cfg.get("qre", "multistart") if starts is None else starts)
    seed = cfg.get("monte_carlo", "seed") if seed is None else seed
    if starts < 1:
        raise GameInputError("多起点个数至少为 1")
    profiles = sobol_starts(game, starts, seed)

    perf = get_performance_manager()
    t0 = perf.start_timer()
    results = perf.map_ordered(
        lambda p: solve_fixed_point(game, dists, p, damping=damping, tol=tol, max_iter=max_iter),
        profiles,
    )
    perf.end_timer(t0, "多起点 QRE 求解")

    found: List[QreResult] = []
    for res in results:
        if not res.converged:
            continue
        if all(res.profile.sup_distance(other.profile) > MULTISTART_DEDUP for other in found):
            found.append(QreResult(res.profile, res.residual, res.iterations, True, "multistart"))
    if not found:
        best = min(results, key=lambda r: r.residual)
        found.append(QreResult(best.profile, best.residual, best.iterations, False, "multistart"))
    logger.info("[QRE求解] %d 个起点得到 %d 个不同的 QRE", starts, len(found))
    return found


def lower_envelope(qres: Sequence[QreResult], complete: bool = True) -> LowerEnvelope:
    """π̲_{i,a_i} = min over the list of π_i(a_i)。"""
    if not qres:
        raise GameInputError("下包络需要至少一个 QRE")
    n_players = len(qres[0].profile)
    value = tuple(
        np.min(np.vstack([res.profile[i] for res in qres]), axis=0)
        for i in range(n_players)
    )
    note = "下确界取自枚举得到的有限 QRE 集合"
    if not complete:
        note += "；该集合不保证完备"
    return LowerEnvelope(value, len(qres), complete, note)
