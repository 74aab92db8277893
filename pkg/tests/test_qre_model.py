import numpy as np
import pytest

from gameLAYER.static_game import GameInputError, MixedProfile, StaticGame, UnsupportedShapeError
from modelLAYER.model_manager import ModelManager
from modelLAYER.perturbation_model import TypeDistribution
from modelLAYER.qre_model import (
    QreResult,
    enumerate_qre_2x2,
    lower_envelope,
    qre_map,
    qre_residual,
    sobol_starts,
    solve_fixed_point,
    solve_multistart,
)


def test_matching_pennies_uniform_unique_center(matching_pennies):
    results = enumerate_qre_2x2(matching_pennies.game, matching_pennies.dists)
    assert len(results) == 1
    np.testing.assert_allclose(results[0].profile.as_array(), [0.5, 0.5, 0.5, 0.5], atol=1e-12)
    assert results[0].converged


def test_coordination_has_three_symmetric_qre(coordination):
    results = enumerate_qre_2x2(coordination.game, coordination.dists)
    assert len(results) == 3
    firsts = sorted(res.profile[0][0] for res in results)
    assert firsts[1] == pytest.approx(0.5, abs=1e-12)
    assert firsts[0] == pytest.approx(1.0 - firsts[2], abs=1e-9)
    for res in results:
        assert res.converged
        assert res.profile[0][0] == pytest.approx(res.profile[1][0], abs=1e-9)


def test_asymmetric_pennies_fixed_point_converges(asym_mp):
    result = solve_fixed_point(asym_mp.game, asym_mp.dists)
    assert result.converged
    assert qre_residual(asym_mp.game, asym_mp.dists, result.profile) <= 1e-8

    enumerated = enumerate_qre_2x2(asym_mp.game, asym_mp.dists)
    assert len(enumerated) == 1
    assert result.profile.sup_distance(enumerated[0].profile) <= 1e-8


@pytest.mark.parametrize("damping", [0.5, 0.9, 1.0])
def test_oscillating_iteration_backs_off_damping(asym_mp, damping):
    # 大阻尼下迭代绕均衡打转，残差不再下降
    result = solve_fixed_point(asym_mp.game, asym_mp.dists, damping=damping)
    assert result.converged
    assert result.iterations < 10_000
    assert result.residual <= 1e-10


def test_fixed_point_reports_non_convergence(asym_mp):
    result = solve_fixed_point(asym_mp.game, asym_mp.dists, max_iter=3)
    assert not result.converged
    assert result.iterations == 3
    assert result.residual > 0


def test_fixed_point_rejects_bad_parameters(vaccination):
    with pytest.raises(GameInputError):
        solve_fixed_point(vaccination.game, vaccination.dists, damping=0.0)
    with pytest.raises(GameInputError):
        solve_fixed_point(vaccination.game, vaccination.dists, tol=-1.0)
    with pytest.raises(GameInputError):
        solve_fixed_point(vaccination.game, vaccination.dists[:1])


def test_enumeration_agrees_with_map(vaccination):
    for res in enumerate_qre_2x2(vaccination.game, vaccination.dists):
        image = qre_map(vaccination.game, vaccination.dists, res.profile)
        assert res.profile.sup_distance(image) <= 1e-9


def test_enumeration_rejects_larger_games(serial_3x2):
    with pytest.raises(UnsupportedShapeError):
        enumerate_qre_2x2(serial_3x2.game, serial_3x2.dists)


def test_enumeration_minimum_grid(vaccination):
    with pytest.raises(GameInputError):
        enumerate_qre_2x2(vaccination.game, vaccination.dists, grid=10)


def test_enumeration_random_games_all_roots_are_qre():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        game = StaticGame.bimatrix(rng.uniform(-5, 5, (2, 2)), rng.uniform(-5, 5, (2, 2)), ["a", "b"], ["c", "d"])
        lam = float(rng.uniform(0.2, 5.0))
        dists = [TypeDistribution.extreme_value(p, 2, lam) for p in game.players]
        results = enumerate_qre_2x2(game, dists)
        assert results
        for res in results:
            assert res.residual <= 1e-9
        # 固定点迭代的结果落在枚举集合里
        fp = solve_fixed_point(game, dists, damping=0.25)
        if fp.converged:
            assert min(fp.profile.sup_distance(r.profile) for r in results) <= 1e-6


def test_sobol_starts_are_distributions(serial_3x2):
    starts = sobol_starts(serial_3x2.game, 8, seed=3)
    assert len(starts) == 8
    for profile in starts:
        assert profile.matches(serial_3x2.game)
        for vec in profile.dist:
            assert vec.sum() == pytest.approx(1.0)
            assert np.all(vec > 0)


def test_multistart_on_three_by_two(serial_3x2):
    results = solve_multistart(serial_3x2.game, serial_3x2.dists, starts=8, seed=1)
    assert results
    for res in results:
        assert res.converged
        assert qre_residual(serial_3x2.game, serial_3x2.dists, res.profile) <= 1e-8


def test_lower_envelope_takes_minimum():
    a = QreResult(MixedProfile((np.array([0.2, 0.8]), np.array([0.6, 0.4]))), 0.0, 1, True)
    b = QreResult(MixedProfile((np.array([0.7, 0.3]), np.array([0.1, 0.9]))), 0.0, 1, True)
    env = lower_envelope([a, b], complete=False)
    np.testing.assert_allclose(env[0], [0.2, 0.3])
    np.testing.assert_allclose(env[1], [0.1, 0.4])
    assert env.count == 2
    assert not env.complete
    with pytest.raises(GameInputError):
        lower_envelope([])


def test_model_manager_frame(coordination):
    manager = ModelManager()
    manager.select_solver("auto")
    manager.run_model(coordination.game, coordination.dists)
    df = manager.results_to_frame(coordination.game)
    assert list(df.columns) == ["qre", "player", "action", "probability", "residual", "converged"]
    assert len(df) == 3 * 4
    assert df.attrs["complete"]
    assert df.attrs["success"]
    sums = df.groupby(["qre", "player"])["probability"].sum()
    np.testing.assert_allclose(sums.to_numpy(), 1.0, atol=1e-12)


def test_model_manager_unknown_solver_falls_back(serial_3x2):
    manager = ModelManager()
    manager.select_solver("simplex")
    assert manager.solver == "auto"
    manager.run_model(serial_3x2.game, serial_3x2.dists, {"starts": 4})
    assert not manager.complete
    assert manager.envelope().count == len(manager.results)
