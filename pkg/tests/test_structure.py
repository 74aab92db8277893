import dataclasses

import numpy as np
import pytest

import rationalLAYER.structure as structure
from gameLAYER.static_game import GameInputError, StaticGame, UnsupportedShapeError
from modelLAYER.perturbation_model import TypeDistribution
from modelLAYER.qre_model import QreResult, enumerate_qre_2x2, lower_envelope
from rationalLAYER.procedure import run_procedure
from rationalLAYER.rationalize_manager import RationalizeManager
from rationalLAYER.report import LIMIT_IS_QRE, LIMIT_SUMS_BELOW_ONE, build_check_table
from rationalLAYER.structure import (
    GUARANTEED_TIGHT,
    RELAXED_NOTICE,
    STRICTLY_LOOSE,
    UNDETERMINED,
    c2_impossibility_check,
    classify,
    condition_c2,
    condition_c2_prime,
    limit_threshold,
    marginal_actions,
    marginal_graph,
    mutual_fulfillment_profile,
    phi,
    phi_partition_holds,
    profile_phi,
    reachable_set,
    tightness_report,
)


def _random_game(rng, rows, cols):
    return StaticGame.bimatrix(
        rng.uniform(-5, 5, (rows, cols)), rng.uniform(-5, 5, (rows, cols)),
        [f"r{k}" for k in range(rows)], [f"c{k}" for k in range(cols)],
    )


def _logit(game, lam):
    return [TypeDistribution.extreme_value(p, k, lam) for p, k in zip(game.players, game.shape)]


# ----------------------------------------------------------------------
# φ / Φ 与图
# ----------------------------------------------------------------------
def test_phi_matching_pennies(matching_pennies):
    game = matching_pennies.game
    assert phi(game, "1", "H", "T") == frozenset({0})
    assert phi(game, "1", "T", "H") == frozenset({1})


def test_phi_constant_difference_is_empty():
    game = StaticGame.bimatrix([[1, 2], [3, 4]], [[0, 1], [1, 0]], ["a", "b"], ["c", "d"])
    assert phi(game, "1", "a", "b") == frozenset()
    assert marginal_actions(game, "1", "a") == frozenset()


def test_vaccination_graph(vaccination):
    graph = marginal_graph(vaccination.game)
    assert sorted(graph.edge_lines()) == ["NV1 -> V2", "NV2 -> V1", "V1 -> NV2", "V2 -> NV1"]
    dot = graph.to_dot()
    assert dot.startswith("digraph marginal {")
    assert "  NV1 -> V2" in dot


def test_asymmetric_pennies_graph_is_one_cycle(asym_mp):
    graph = marginal_graph(asym_mp.game)
    assert len(graph.edges) == 4
    for node in graph.nodes:
        assert len(graph.successors(node)) == 1
        assert reachable_set(graph, node) == frozenset(graph.nodes)


def test_reachable_set_modes(vaccination):
    graph = marginal_graph(vaccination.game)
    assert reachable_set(graph, (0, 0)) == frozenset({(0, 0), (1, 1)})
    assert reachable_set(graph, (0, 0), mode="ancestry") == frozenset({(0, 0), (1, 1)})
    with pytest.raises(GameInputError):
        reachable_set(graph, (0, 0), mode="closure")
    with pytest.raises(GameInputError):
        reachable_set(graph, (5, 0))


def test_graph_needs_two_players():
    game = StaticGame(("1", "2", "3"), (("a", "b"),) * 3, tuple(np.zeros((2, 2, 2)) for _ in range(3)))
    with pytest.raises(UnsupportedShapeError):
        marginal_graph(game)
    check = c2_impossibility_check(game)
    assert not check.applicable


def test_profile_phi_three_players():
    rng = np.random.default_rng(4)
    game = StaticGame(("1", "2", "3"), (("a", "b"),) * 3, tuple(rng.normal(size=(2, 2, 2)) for _ in range(3)))
    forward = profile_phi(game, "1", "a", "b")
    backward = profile_phi(game, "1", "b", "a")
    assert forward | backward == {(x, y) for x in range(2) for y in range(2)}
    assert len(forward) == 3


def test_phi_partition_on_random_games():
    rng = np.random.default_rng(6)
    for _ in range(500):
        rows, cols = rng.integers(2, 5, size=2)
        game = _random_game(rng, int(rows), int(cols))
        assert phi_partition_holds(game)


def test_phi_partition_with_integer_ties():
    rng = np.random.default_rng(8)
    for _ in range(200):
        game = StaticGame.bimatrix(
            rng.integers(-2, 3, (3, 3)), rng.integers(-2, 3, (3, 3)), ["a", "b", "c"], ["x", "y", "z"],
        )
        assert phi_partition_holds(game)


# ----------------------------------------------------------------------
# 分类与条件
# ----------------------------------------------------------------------
def test_vaccination_classification(vaccination):
    result = classify(vaccination.game)
    assert result.serial
    for c in result.actions.values():
        assert not c.c1
        assert c.c2 and c.c2_prime


def test_coordination_satisfies_c2(coordination):
    result = classify(coordination.game)
    assert all(c.c2 for c in result.actions.values())
    assert sorted(marginal_graph(coordination.game).edge_lines()) == ["A1 -> A2", "A2 -> A1", "B1 -> B2", "B2 -> B1"]


def test_non_serial_and_eventually_non_serial():
    # 玩家 1 的收益差与对手行动无关：两个行动都是非序列的
    game = StaticGame.bimatrix([[2, 0], [1, -1]], [[3, 0], [0, 1]], ["a", "b"], ["c", "d"])
    result = classify(game)
    assert result[(0, 0)].non_serial and result[(0, 1)].non_serial
    assert not result.serial
    for b in range(2):
        node = result[(1, b)]
        assert not node.non_serial
        assert node.eventually_non_serial
        assert node.c1


def test_c2_matches_reachability_criterion():
    rng = np.random.default_rng(10)
    for _ in range(500):
        game = _random_game(rng, 2, 2)
        graph = marginal_graph(game)
        for i in range(2):
            for a in range(2):
                assert condition_c2(game, i, a, graph) == condition_c2_prime(game, i, a, graph)


def test_classification_is_affine_invariant():
    rng = np.random.default_rng(12)
    for _ in range(50):
        game = _random_game(rng, 3, 2)
        scale = rng.uniform(0.5, 3.0, 2)
        # 正数缩放，再加上只依赖对手行动的平移
        moved = StaticGame.bimatrix(
            scale[0] * game.payoffs[0] + rng.normal(size=(1, 2)),
            scale[1] * game.payoffs[1] + rng.normal(size=(3, 1)),
            game.actions[0], game.actions[1],
        )
        before, after = classify(game), classify(moved)
        assert sorted(marginal_graph(game).edges) == sorted(marginal_graph(moved).edges)
        for node in before.actions:
            assert before[node].c2 == after[node].c2


def test_serial_games_with_three_or_more_actions_have_no_c2():
    rng = np.random.default_rng(14)
    checked = 0
    while checked < 200:
        big = int(rng.integers(3, 6))
        small = int(rng.integers(2, 6))
        rows, cols = (big, small) if rng.random() < 0.5 else (small, big)
        game = _random_game(rng, rows, cols)
        if not classify(game).serial:
            continue
        check = c2_impossibility_check(game)
        assert check.applicable
        assert check.holds, check.witness
        checked += 1


def test_serial_fixture_has_no_c2(serial_3x2):
    check = c2_impossibility_check(serial_3x2.game)
    assert check.applicable and check.holds
    assert check.reason == "no action satisfies C2"


def test_impossibility_not_applicable_to_2x2(vaccination):
    assert not c2_impossibility_check(vaccination.game).applicable


# ----------------------------------------------------------------------
# 紧性判定
# ----------------------------------------------------------------------
def test_vaccination_report_guaranteed_tight(vaccination):
    game, dists = vaccination.game, vaccination.dists
    trace = run_procedure(game, dists)
    report = tightness_report(game, dists, trace=trace)
    assert report.qre_count == 1
    assert not report.relaxed
    for entry in report.actions:
        assert entry.verdict == GUARANTEED_TIGHT
        assert entry.reason == "C2"
    assert report.verdict("NV1") == GUARANTEED_TIGHT
    for profile, residual in report.fulfillment.values():
        assert residual <= 1e-6


def test_matching_pennies_report_undetermined(matching_pennies, asym_mp):
    for definition in (matching_pennies, asym_mp):
        report = tightness_report(definition.game, definition.dists)
        assert report.qre_count == 1
        assert {e.verdict for e in report.actions} == {UNDETERMINED}


def test_three_by_two_report_is_relaxed(serial_3x2):
    report = tightness_report(serial_3x2.game, serial_3x2.dists)
    assert report.relaxed
    assert report.notice == RELAXED_NOTICE
    assert report.qre_count is None


def test_report_unknown_label(vaccination):
    report = tightness_report(vaccination.game, vaccination.dists)
    with pytest.raises(GameInputError):
        report.verdict("X9")


def test_limit_threshold_identity(vaccination):
    game, dists = vaccination.game, vaccination.dists
    trace = run_procedure(game, dists)
    # NV1 的唯一边际行动是 V2
    q = float(trace.limit[1][1])
    expected = (1.0 - q) * 1.0 + q * (-4.0)
    assert limit_threshold(game, "1", "NV", q) == pytest.approx(expected)
    with pytest.raises(GameInputError):
        limit_threshold(game, "1", "NV", 1.5)


def test_mutual_fulfillment_is_qre(vaccination, asym_mp):
    game, dists = vaccination.game, vaccination.dists
    trace = run_procedure(game, dists)
    profile, residual = mutual_fulfillment_profile(game, dists, trace, "1", "NV")
    assert residual <= 1e-6
    qre = enumerate_qre_2x2(game, dists)[0]
    assert profile.sup_distance(qre.profile) <= 1e-4

    asym_trace = run_procedure(asym_mp.game, asym_mp.dists)
    with pytest.raises(GameInputError):
        mutual_fulfillment_profile(asym_mp.game, asym_mp.dists, asym_trace, "1", "H")


def test_coordination_limits_reach_lower_envelope(coordination):
    game, dists = coordination.game, coordination.dists
    qres = enumerate_qre_2x2(game, dists)
    assert len(qres) == 3
    envelope = lower_envelope(qres)
    trace = run_procedure(game, dists)
    for i in range(2):
        np.testing.assert_allclose(trace.limit[i], envelope[i], atol=1e-4)
    assert tightness_report(game, dists, qres=qres).verdict("A1") == GUARANTEED_TIGHT


def test_multi_qre_games_satisfy_c1_or_c2():
    # 一般位置的 2x2 博弈中，多个 QRE 只出现在每个行动都满足 C1 或 C2 的博弈里
    rng = np.random.default_rng(21)
    multi = 0
    for _ in range(300):
        game = _random_game(rng, 2, 2)
        qres = enumerate_qre_2x2(game, _logit(game, float(rng.uniform(1.0, 10.0))))
        if len(qres) < 2:
            continue
        multi += 1
        assert all(c.c1 or c.c2 for c in classify(game).actions.values())
    assert multi > 0


def test_multiple_qre_with_failed_conditions_are_strictly_loose(coordination):
    rng = np.random.default_rng(23)
    cases = [(coordination.game, coordination.dists)]
    for lam in (1.0, 5.0, 20.0):
        cases.append((coordination.game, _logit(coordination.game, lam)))
    for _ in range(200):
        game = _random_game(rng, 2, 2)
        cases.append((game, _logit(game, float(rng.uniform(1.0, 10.0)))))

    triggered = 0
    for game, dists in cases:
        qres = enumerate_qre_2x2(game, dists)
        report = tightness_report(game, dists, qres=qres)
        if len(qres) < 2 or all(e.c1 or e.c2 for e in report.actions):
            continue
        triggered += 1
        assert {e.verdict for e in report.actions} == {STRICTLY_LOOSE}
        envelope = lower_envelope(qres)
        trace = run_procedure(game, dists)
        for i in range(2):
            assert np.all(trace.limit[i] <= envelope[i] - 1e-6)
    if triggered == 0:
        pytest.skip("no multi-QRE 2x2 instance violates both C1 and C2")


# ----------------------------------------------------------------------
# 管理器与报告
# ----------------------------------------------------------------------
def test_manager_summary_verdicts(matching_pennies, asym_mp):
    manager = RationalizeManager()
    df = manager.rationalize(matching_pennies.game, matching_pennies.dists, {"tol": 1e-9})
    summary = df.attrs["summary"]
    assert summary["verdict"] == LIMIT_IS_QRE
    assert summary["limits"]["H1"] == pytest.approx(0.5, abs=1e-6)

    summary = manager.rationalize(asym_mp.game, asym_mp.dists).attrs["summary"]
    assert summary["verdict"] == LIMIT_SUMS_BELOW_ONE
    assert summary["residual"] is None


def test_manager_structure_table(vaccination):
    manager = RationalizeManager()
    manager.rationalize(vaccination.game, vaccination.dists)
    table = manager.analyze_structure(vaccination.game, vaccination.dists)
    assert list(table.columns) == ["node", "non_serial", "eventually_non_serial", "C1", "C2", "C2'", "verdict"]
    assert set(table["verdict"]) == {GUARANTEED_TIGHT}
    assert table.attrs["qre_count"] == 1
    assert set(table.attrs["report"].fulfillment) == {"NV1", "V1", "NV2", "V2"}


def test_check_table(vaccination):
    trace = run_procedure(vaccination.game, vaccination.dists)
    qre = enumerate_qre_2x2(vaccination.game, vaccination.dists)[0].profile
    table = build_check_table(qre, trace)
    assert table["passed"].all()
    assert list(table["player"]) == ["1", "2"]


def test_reachability_readings_coincide_on_bundled_games(vaccination, matching_pennies, asym_mp,
                                                           coordination, serial_3x2):
    for definition in (vaccination, matching_pennies, asym_mp, coordination, serial_3x2):
        graph = marginal_graph(definition.game)
        for node in graph.nodes:
            assert reachable_set(graph, node) == reachable_set(graph, node, mode="ancestry")


def test_multiple_qre_marks_every_action_strictly_loose(monkeypatch, vaccination):
    game, dists = vaccination.game, vaccination.dists
    real = structure.classify(game)
    # V1 的 C2 失效时，即便其余行动满足 C2，也全部判为严格松弛
    broken = dict(real.actions)
    broken[(0, 1)] = dataclasses.replace(broken[(0, 1)], c2=False, c2_prime=False)
    monkeypatch.setattr(structure, "classify", lambda g, tol=None: dataclasses.replace(real, actions=broken))
    qre = enumerate_qre_2x2(game, dists)[0]
    qres = [qre, QreResult(qre.profile, qre.residual, qre.iterations, True, "enumeration")]

    report = tightness_report(game, dists, qres=qres)
    assert report.qre_count == 2
    assert [e.verdict for e in report.actions] == [STRICTLY_LOOSE] * 4
    assert {e.reason for e in report.actions} == {"multiple QRE"}

    single = tightness_report(game, dists, qres=qres[:1])
    assert single.verdict("V1") == UNDETERMINED
    assert single.verdict("NV1") == GUARANTEED_TIGHT
