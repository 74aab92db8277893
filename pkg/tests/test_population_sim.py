import numpy as np
import pytest

from gameLAYER.static_game import GameInputError, MixedProfile, StaticGame, expected_payoffs
from modelLAYER.perturbation_model import TypeDistribution, choice_probabilities
from modelLAYER.qre_model import enumerate_qre_2x2
from rationalLAYER.procedure import BoundsVector, ProcedureTrace, run_procedure
from simLAYER.population_sim import (
    EMPIRICAL_LAG,
    FIXED,
    RoundRecord,
    SimulationConfig,
    SimulationTrace,
    best_response,
    simulate,
    test_observed as observed_check,
)


def test_best_response_examples(matching_pennies, vaccination):
    uniform = MixedProfile.uniform(matching_pennies.game)
    assert best_response(matching_pennies.game, "1", np.array([2.0, -2.0]), uniform) == 0
    # 扰动后收益相等时取声明顺序靠前的行动
    assert best_response(matching_pennies.game, "1", np.zeros(2), uniform) == 0
    belief = MixedProfile.uniform(vaccination.game)
    assert best_response(vaccination.game, "1", np.zeros(2), belief) == 0
    assert best_response(vaccination.game, "1", np.array([0.0, 2.0]), belief) == 1


def test_best_response_shape(vaccination):
    with pytest.raises(GameInputError):
        best_response(vaccination.game, "1", np.zeros(3), MixedProfile.uniform(vaccination.game))


def test_config_validation(vaccination):
    with pytest.raises(GameInputError):
        SimulationConfig(agents_per_round=0, belief=MixedProfile.uniform(vaccination.game))
    with pytest.raises(GameInputError):
        SimulationConfig(agents_per_round=10, rounds=0, belief=MixedProfile.uniform(vaccination.game))
    with pytest.raises(GameInputError):
        SimulationConfig(agents_per_round=10)
    with pytest.raises(GameInputError):
        SimulationConfig(agents_per_round=10, belief_mode="fictitious")


def test_simulation_is_deterministic(vaccination):
    config = SimulationConfig(agents_per_round=5000, rounds=3, seed=9, belief_mode=EMPIRICAL_LAG, chunk_size=1024)
    first = simulate(vaccination.game, vaccination.dists, config).to_frame()
    second = simulate(vaccination.game, vaccination.dists, config).to_frame()
    assert first.equals(second)
    other = simulate(vaccination.game, vaccination.dists,
                     SimulationConfig(5000, 3, 10, EMPIRICAL_LAG, chunk_size=1024)).to_frame()
    assert not first.equals(other)


def test_simulation_independent_of_thread_count(monkeypatch, vaccination):
    config = SimulationConfig(agents_per_round=20_000, seed=3, belief=MixedProfile.uniform(vaccination.game),
                              chunk_size=1500)
    monkeypatch.setenv("QRE_THREADS", "1")
    single = simulate(vaccination.game, vaccination.dists, config).to_frame()
    monkeypatch.setenv("QRE_THREADS", "4")
    threaded = simulate(vaccination.game, vaccination.dists, config).to_frame()
    assert single.equals(threaded)


def test_single_agent_is_point_mass(vaccination):
    config = SimulationConfig(agents_per_round=1, belief=MixedProfile.uniform(vaccination.game))
    trace = simulate(vaccination.game, vaccination.dists, config)
    for vec in trace.round_profile().dist:
        assert sorted(vec.tolist()) == [0.0, 1.0]


def test_fixed_belief_matches_logit(vaccination):
    belief = MixedProfile.uniform(vaccination.game)
    n = 100_000
    trace = simulate(vaccination.game, vaccination.dists, SimulationConfig(n, seed=1, belief=belief))
    df = trace.to_frame()
    assert list(df.columns) == ["round", "player", "action", "frequency", "analytic_frequency", "deviation"]
    for i, dist in enumerate(vaccination.dists):
        p = choice_probabilities(dist, expected_payoffs(vaccination.game, i, belief))
        freq = trace.round_profile()[i]
        assert np.all(np.abs(freq - p) <= 0.005)
        np.testing.assert_allclose(trace.records[0].analytic[i], p)


def test_fixed_belief_frequencies_within_clt_band(matching_pennies, asym_mp, vaccination):
    n = 50_000
    for k, definition in enumerate((matching_pennies, asym_mp, vaccination)):
        belief = MixedProfile.uniform(definition.game)
        trace = simulate(definition.game, definition.dists, SimulationConfig(n, seed=100 + k, belief=belief))
        record = trace.records[0]
        for i in range(2):
            p = record.analytic[i]
            bound = 4.0 * np.max(np.sqrt(p * (1.0 - p) / n))
            assert np.max(np.abs(record.deviation(i))) <= bound + 1e-12


@pytest.mark.slow
def test_matching_pennies_large_population(matching_pennies):
    qre = enumerate_qre_2x2(matching_pennies.game, matching_pennies.dists)[0].profile
    trace = simulate(matching_pennies.game, matching_pennies.dists,
                     SimulationConfig(1_000_000, seed=2, belief=qre))
    np.testing.assert_allclose(trace.round_profile().as_array(), 0.5, atol=0.002)


@pytest.mark.slow
def test_lagged_beliefs_settle_near_qre(matching_pennies):
    start = MixedProfile.pure(matching_pennies.game, ["H", "H"])
    config = SimulationConfig(10_000, rounds=200, seed=4, belief_mode=EMPIRICAL_LAG, belief=start)
    trace = simulate(matching_pennies.game, matching_pennies.dists, config)
    average = trace.cumulative_profile()
    assert np.all((average.as_array() >= 0.48) & (average.as_array() <= 0.52))


def test_observed_qre_population_passes(vaccination):
    game, dists = vaccination.game, vaccination.dists
    qre = enumerate_qre_2x2(game, dists)[0].profile
    proc = run_procedure(game, dists)
    trace = simulate(game, dists, SimulationConfig(100_000, rounds=2, seed=5, belief=qre))
    report = observed_check(trace, proc)
    assert len(report) == 2
    assert all(r.passed for r in report)


def _point_mass_trace(game, counts):
    belief = MixedProfile.uniform(game)
    counts = [np.asarray(c, dtype=np.int64) for c in counts]
    record = RoundRecord(0, belief, counts, [c.copy() for c in counts], [c / c.sum() for c in counts])
    config = SimulationConfig(int(counts[0].sum()), belief=belief, belief_mode=FIXED)
    return SimulationTrace(game.players, game.actions, config, [record])


def test_observed_point_mass_fails(vaccination):
    game = vaccination.game
    proc = run_procedure(game, vaccination.dists)
    assert proc.limit[0][0] > 0
    report = observed_check(_point_mass_trace(game, [[0, 1000], [500, 500]]), proc)
    assert not report[0].passed
    first = report[0].verdicts[0]
    assert not first.passed
    assert first.binding_action == "NV"


def test_observed_zero_bounds_always_pass(vaccination):
    game = vaccination.game
    proc = ProcedureTrace(game.players, game.actions, [BoundsVector.zeros(game)], False, float("inf"))
    report = observed_check(_point_mass_trace(game, [[0, 10], [10, 0]]), proc)
    assert report[0].passed


def test_observed_rejects_other_game(vaccination, serial_3x2):
    proc = run_procedure(serial_3x2.game, serial_3x2.dists, max_iter=1)
    trace = _point_mass_trace(vaccination.game, [[1, 1], [1, 1]])
    with pytest.raises(GameInputError):
        observed_check(trace, proc)


def _within_clt_band(game, dists, belief, n, seed):
    record = simulate(game, dists, SimulationConfig(n, seed=seed, belief=belief)).records[0]
    for i in range(game.n_players):
        p = record.analytic[i]
        if np.max(np.abs(record.deviation(i))) > 4.0 * np.max(np.sqrt(p * (1.0 - p) / n)) + 1e-12:
            return False
    return True


@pytest.mark.slow
def test_random_instances_within_clt_band():
    rng = np.random.default_rng(77)
    for k in range(20):
        shape = (int(rng.integers(2, 4)), int(rng.integers(2, 4)))
        game = StaticGame.bimatrix(rng.normal(size=shape), rng.normal(size=shape),
                                   [f"a{j}" for j in range(shape[0])], [f"b{j}" for j in range(shape[1])])
        lam = float(rng.uniform(0.5, 3.0))
        dists = [TypeDistribution.extreme_value(p, m, lam) for p, m in zip(game.players, shape)]
        belief = MixedProfile(tuple(rng.dirichlet(np.ones(m)) for m in shape))
        # 失败时换一个种子重试一次
        assert _within_clt_band(game, dists, belief, 20_000, k) or _within_clt_band(game, dists, belief, 20_000, 1000 + k)
