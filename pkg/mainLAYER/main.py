import functools
import logging
import os
import sys
from typing import List, Optional

import click
import pandas as pd

# 动态添加项目根目录到sys.path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.config_manager import get_config_manager
from dataLAYER.data_manager import DataManager
from dataLAYER.game_file import GameDefinition, GameFileError
from gameLAYER.static_game import GameInputError, MixedProfile, UnsupportedShapeError
from modelLAYER.model_manager import ModelManager
from modelLAYER.qre_model import QreResult, enumerate_qre_2x2, solve_fixed_point
from rationalLAYER.procedure import MonotonicityError, run_procedure
from rationalLAYER.rationalize_manager import RationalizeManager
from rationalLAYER.structure import RELAXED_NOTICE, c2_impossibility_check, marginal_graph
from simLAYER.population_sim import EMPIRICAL_LAG, FIXED, SimulationConfig, simulate, test_observed

EXIT_PARSE = 2
EXIT_NOT_CONVERGED = 3
EXIT_UNSUPPORTED = 4


def _fmt(x: float) -> str:
    digits = int(get_config_manager().get("output", "significant_digits", 12))
    return f"{float(x):.{digits}g}"


def _float_format() -> str:
    return f"%.{int(get_config_manager().get('output', 'significant_digits', 12))}g"


def _echo_frame(df: pd.DataFrame) -> None:
    click.echo(df.to_csv(sep="\t", index=False, lineterminator="\n", float_format=_float_format()), nl=False)


def _load(data_manager: DataManager, path: str) -> GameDefinition:
    try:
        return data_manager.load_game(path)
    except GameFileError as exc:
        click.echo(f"error: {exc}", err=True)
        for line in exc.diagnostics[1:]:
            click.echo(f"  {line}", err=True)
        sys.exit(EXIT_PARSE)


def _guard(fn):
    """把库异常映射为退出码。"""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except UnsupportedShapeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_UNSUPPORTED)
        except GameInputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_PARSE)
        except MonotonicityError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_NOT_CONVERGED)
    return wrapper


def _qre_frame(definition: GameDefinition, results: List[QreResult]) -> pd.DataFrame:
    manager = ModelManager()
    manager.results = list(results)
    return manager.results_to_frame(definition.game)


@click.group()
@click.option("-v", "--verbose", count=True, help="输出日志：-v 为 INFO，-vv 为 DEBUG")
def cli(verbose: int) -> None:
    """群体博弈 QRE 与 Δᵖ-可理性化分析工具。"""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        force=True,
    )


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--grid", type=int, default=None, help="2x2 枚举的初始网格大小")
@click.option("--tol", type=float, default=None, help="不动点迭代容差")
@click.option("--damping", type=float, default=None, help="不动点迭代阻尼系数")
@click.option("--all", "enumerate_all", is_flag=True, help="列出全部 QRE（2x2 枚举，其它规模多起点）")
@_guard
def qre(file: str, grid: Optional[int], tol: Optional[float], damping: Optional[float], enumerate_all: bool) -> None:
    """求解 QRE。"""
    definition = _load(DataManager(), file)
    game, dists = definition.game, definition.dists
    manager = ModelManager()
    if enumerate_all:
        manager.select_solver("auto")
        manager.run_model(game, dists, {"grid": grid, "tol": tol, "damping": damping})
        _echo_frame(manager.results_to_frame(game))
        if not manager.complete:
            click.echo("note: multistart search, completeness not guaranteed")
        return

    result = solve_fixed_point(game, dists, damping=damping, tol=tol)
    _echo_frame(_qre_frame(definition, [result]))
    if not result.converged:
        click.echo(f"not converged after {result.iterations} iterations (residual {_fmt(result.residual)})", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--tol", type=float, default=None, help="下界迭代容差（sup 范数）")
@click.option("--max-iter", type=int, default=None, help="最大迭代步数")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="下界轨迹 CSV 输出路径")
@_guard
def rationalize(file: str, tol: Optional[float], max_iter: Optional[int], csv_path: Optional[str]) -> None:
    """运行 Δᵖ-可理性化过程并输出下界轨迹。"""
    data_manager = DataManager()
    definition = _load(data_manager, file)
    manager = RationalizeManager()
    df = manager.rationalize(definition.game, definition.dists, {"tol": tol, "max_iter": max_iter})
    if csv_path:
        data_manager.export_csv(df, csv_path)

    summary = df.attrs["summary"]
    click.echo(f"steps: {summary['steps']}")
    for label, value in summary["limits"].items():
        click.echo(f"q*[{label}] = {_fmt(value)}")
    for player, total in summary["sums"].items():
        click.echo(f"sum[{player}] = {_fmt(total)}")
    click.echo(summary["verdict"])
    if not summary["converged"]:
        click.echo("procedure did not converge within max-iter", err=True)
        sys.exit(EXIT_NOT_CONVERGED)


@cli.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--dot", "dot_path", type=click.Path(dir_okay=False), default=None, help="DOT 图输出路径")
@_guard
def graph(file: str, dot_path: Optional[str]) -> None:
    """边际行动图、行动分类与紧性判定。"""
    data_manager = DataManager()
    definition = _load(data_manager, file)
    game = definition.game
    if game.n_players != 2:
        click.echo(f"error: graph analysis needs 2 players; {RELAXED_NOTICE}", err=True)
        sys.exit(EXIT_UNSUPPORTED)

    manager = RationalizeManager()
    table = manager.analyze_structure(game, definition.dists)
    _echo_frame(table)
    report = manager.report
    if report.relaxed:
        click.echo(f"note: {RELAXED_NOTICE}")
    check = c2_impossibility_check(game)
    if check.applicable:
        click.echo(check.reason if check.holds else f"C2 action found: {check.witness}")

    graph_obj = marginal_graph(game)
    for line in graph_obj.edge_lines():
        click.echo(line)
    if dot_path:
        data_manager.export_text(graph_obj.to_dot(), dot_path)


def _qre_belief(definition: GameDefinition) -> QreResult:
    game, dists = definition.game, definition.dists
    if game.is_2x2():
        found = [r for r in enumerate_qre_2x2(game, dists) if r.converged]
        if found:
            return found[0]
    return solve_fixed_point(game, dists)


@cli.command(name="simulate")
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--agents", type=int, default=None, help="每轮个体数")
@click.option("--rounds", type=int, default=None, help="轮数")
@click.option("--seed", type=int, default=None, help="随机种子")
@click.option("--belief", type=click.Choice(["qre", "uniform", "lag"]), default="qre", show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="模拟轨迹 CSV 输出路径")
@_guard
def simulate_cmd(file: str, agents: Optional[int], rounds: Optional[int], seed: Optional[int],
                 belief: str, csv_path: Optional[str]) -> None:
    """群体抽样模拟，并对照 Δᵖ 下界检查观测分布。"""
    cfg = get_config_manager()
    data_manager = DataManager()
    definition = _load(data_manager, file)
    game, dists = definition.game, definition.dists

    if belief == "qre":
        result = _qre_belief(definition)
        if not result.converged:
            click.echo("QRE belief did not converge", err=True)
            sys.exit(EXIT_NOT_CONVERGED)
        start, mode = result.profile, FIXED
    elif belief == "uniform":
        start, mode = MixedProfile.uniform(game), FIXED
    else:
        start, mode = MixedProfile.uniform(game), EMPIRICAL_LAG

    config = SimulationConfig(
        agents_per_round=int(agents if agents is not None else cfg.get("simulation", "agents")),
        rounds=int(rounds if rounds is not None else cfg.get("simulation", "rounds")),
        seed=int(seed if seed is not None else cfg.get("simulation", "seed")),
        belief_mode=mode,
        belief=start,
    )
    trace = simulate(game, dists, config)
    df = trace.to_frame()
    if csv_path:
        data_manager.export_csv(df, csv_path)

    final = trace.round_profile()
    average = trace.cumulative_profile()
    for i, player in enumerate(game.players):
        for a, action in enumerate(game.actions[i]):
            click.echo(f"freq[{game.node_label(i, a)}] = {_fmt(final[i][a])} (average {_fmt(average[i][a])})")

    proc = run_procedure(game, dists)
    report = test_observed(trace, proc)
    passed = all(r.passed for r in report)
    if not passed:
        worst = min((r.binding for r in report), key=lambda v: v.margin)
        click.echo(f"binding bound: {worst.player}/{worst.binding_action} q* = {_fmt(worst.binding_bound)}")
    click.echo(f"bounds check: {'PASS' if passed else 'FAIL'}")
    if not proc.converged:
        sys.exit(EXIT_NOT_CONVERGED)


def main() -> None:
    cli(prog_name="qre-analysis")


if __name__ == "__main__":
    main()
