import numpy as np
import pytest

from ssrc.core import NoiseSpec, RelationalGraph, StochasticVector, TimeSeriesFrame
from ssrc.embedding import embed_reduced
from ssrc.errors import UnknownRegimeError, ValidationError
from ssrc.ident import CouplingModel, closed_loop_decompose, identify
from ssrc.sim import (
    GaussianSampler,
    SimulationSpec,
    competition_coupling,
    favored_agents,
    forecast,
    generate_competition_scenario,
    make_rng,
    random_coupling,
    simulate,
    step,
)

from helpers import excited_series, random_identifiable_graph, truth_model

K2 = RelationalGraph.complete(2)


def _model(W, graph=K2, p=1, regime="default"):
    return CouplingModel.from_matrix(np.asarray(W, float), graph, p, regime_id=regime)


class TestStep:
    @pytest.mark.parametrize("x", [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]])
    def test_uniform_columns(self, x):
        g = RelationalGraph.complete(3)
        m = _model(np.full((3, 10), 1 / 3), g, 2)
        np.testing.assert_allclose(step(m, np.array(x)), np.full(3, 1 / 3), atol=1e-15)

    def test_absorbing_hand_iteration(self):
        m = _model([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        x = np.array([0.0, 1.0])
        expected = [[0.5, 0.5], [0.75, 0.25], [0.875, 0.125]]
        for e in expected:
            x = step(m, x)
            np.testing.assert_allclose(x, e, atol=1e-15)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        g = RelationalGraph.complete(4)
        m = _model(random_coupling(g, 2, rng), g, 2)
        for x in rng.dirichlet(np.ones(4), size=50):
            assert abs(step(m, x).sum() - 1) <= 1e-12

    def test_noise_is_projected(self):
        m = _model([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        out = step(m, np.array([1.0, 0.0]), noise_draw=np.array([0.5, -0.5]))
        np.testing.assert_allclose(out, [1.0, 0.0])


class TestSimulate:
    def setup_method(self):
        rng = np.random.default_rng(1)
        g = RelationalGraph.complete(3)
        self.model = _model(random_coupling(g, 2, rng), g, 2)
        self.x0 = StochasticVector([0.2, 0.3, 0.5])

    def test_horizon_zero(self):
        tr = simulate(SimulationSpec(self.model, (), 0, self.x0))
        assert tr.states.shape == (1, 3) and tr.observations.shape == (0, 3)
        assert tr.applied_regimes == ()

    def test_deterministic(self):
        spec = SimulationSpec(self.model, ("default",) * 30, 30, self.x0)
        a, b = simulate(spec), simulate(spec)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.observations, a.states[1:])

    def test_seeded_noise_reproducible(self):
        noise = NoiseSpec.isotropic(3, 1e-3, 1e-2, seed=9)
        spec = SimulationSpec(self.model, ("default",) * 30, 30, self.x0, noise=noise)
        a, b = simulate(spec), simulate(spec)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.observations, b.observations)
        other = simulate(SimulationSpec(self.model, ("default",) * 30, 30, self.x0,
                                        noise=NoiseSpec.isotropic(3, 1e-3, 1e-2, seed=10)))
        assert not np.array_equal(a.states, other.states)
        np.testing.assert_allclose(a.states.sum(axis=1), 1, atol=1e-12)
        assert np.all(a.states >= 0)

    def test_zero_noise_matches_noise_free(self):
        noise = NoiseSpec(np.zeros((3, 3)), np.zeros((3, 3)), seed=1)
        a = simulate(SimulationSpec(self.model, ("default",) * 20, 20, self.x0, noise=noise))
        b = simulate(SimulationSpec(self.model, ("default",) * 20, 20, self.x0))
        assert np.array_equal(a.states, b.states)

    def test_observation_matrix(self):
        C = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        tr = simulate(SimulationSpec(self.model, ("default",) * 5, 5, self.x0, observation_matrix=C))
        np.testing.assert_allclose(tr.observations, tr.states[1:] @ C.T)

    def test_unknown_regime(self):
        with pytest.raises(UnknownRegimeError):
            SimulationSpec(self.model, ("default", "other"), 2, self.x0)

    def test_schedule_length(self):
        with pytest.raises(ValidationError):
            SimulationSpec(self.model, ("default",), 2, self.x0)

    def test_restarts_start_segments(self):
        spec = SimulationSpec(self.model, ("default",) * 10, 10, self.x0, restart_every=4)
        tr = simulate(spec)
        assert tr.segments.tolist() == [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2]

    def test_simplex_invariance_long(self):
        tr = simulate(SimulationSpec(self.model, ("default",) * 500, 500, self.x0))
        assert np.all(tr.states >= -1e-10)
        np.testing.assert_allclose(tr.states.sum(axis=1), 1, atol=1e-10)


def test_noise_covariance_statistics():
    sigma2 = 0.04
    draws = GaussianSampler(sigma2 * np.eye(3), make_rng(123, 0)).draw(10_000)
    cov = np.cov(draws, rowvar=False)
    assert np.all(np.abs(np.diag(cov) - sigma2) <= 0.05 * sigma2)
    off = cov[~np.eye(3, dtype=bool)]
    # off-diagonal entries are zero in expectation; bound them relative to sigma^2
    assert np.all(np.abs(off) <= 0.05 * sigma2)


def test_semidefinite_covariance_uses_jitter():
    s = GaussianSampler(np.array([[1.0, 1.0], [1.0, 1.0]]), make_rng(0))
    d = s.draw(2000)
    assert np.corrcoef(d.T)[0, 1] > 0.999


def test_streams_are_independent():
    a = make_rng(5, 0).random(4)
    b = make_rng(5, 1).random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, make_rng(5, 0).random(4))


class TestGenerator:
    def test_bias_zero_uniform_columns(self):
        g = RelationalGraph.hub(4)
        truth, _ = generate_competition_scenario(4, 2, g, 0.0, seed=1, steps=50)
        P = truth.dictionary.pattern()
        for m in range(P.shape[1]):
            col = truth.W_hat[:, m]
            np.testing.assert_allclose(col[P[:, m]], 1 / P[:, m].sum(), atol=1e-15)
            assert np.all(col[~P[:, m]] == 0)

    def test_bias_zero_long_run_uniform(self):
        g = RelationalGraph.complete(3)
        truth, _ = generate_competition_scenario(3, 2, g, 0.0, seed=2, steps=30)
        tr = forecast(truth, TimeSeriesFrame([[0.7, 0.2, 0.1]]), 200)
        np.testing.assert_allclose(tr.states[-1], np.full(3, 1 / 3), atol=1e-6)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bias_one_concentrates_on_favored(self, seed):
        g = RelationalGraph.complete(4)
        truth, _ = generate_competition_scenario(4, 2, g, 1.0, seed=seed, steps=30)
        k = favored_agents(4, seed)[0]
        tr = forecast(truth, TimeSeriesFrame([[0.25] * 4]), 200)
        assert np.any(tr.states[:, k] >= 0.9)

    def test_training_series_recovers(self):
        g = RelationalGraph.hub(3)
        truth, frame = generate_competition_scenario(3, 2, g, 0.5, seed=4)
        assert frame.num_transitions >= 10 * truth.dictionary.size
        model = identify(frame, g, 2)["default"]
        assert np.max(np.abs(model.W_hat - truth.W_hat)) <= 1e-4

    def test_reproducible(self):
        g = RelationalGraph.complete(3)
        a = generate_competition_scenario(3, 1, g, 0.3, seed=7, steps=40)
        b = generate_competition_scenario(3, 1, g, 0.3, seed=7, steps=40)
        assert np.array_equal(a[0].W_hat, b[0].W_hat)
        assert np.array_equal(a[1].states, b[1].states)

    def test_rejects(self):
        with pytest.raises(ValidationError):
            generate_competition_scenario(1, 1, RelationalGraph.complete(1), 0.5, seed=0)
        with pytest.raises(ValidationError):
            competition_coupling(K2, 1, 1.5, [0])


class TestForecast:
    def test_horizon_one_is_step(self):
        rng = np.random.default_rng(3)
        g = RelationalGraph.complete(3)
        m = _model(random_coupling(g, 2, rng), g, 2)
        hist = TimeSeriesFrame(rng.dirichlet(np.ones(3), size=4))
        tr = forecast(m, hist, 1)
        np.testing.assert_array_equal(tr.states[1], step(m, hist.states[-1]))

    def test_fixed_point(self):
        m = _model([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        tr = forecast(m, TimeSeriesFrame([[1.0, 0.0]]), 10)
        np.testing.assert_allclose(tr.states, np.tile([1.0, 0.0], (11, 1)), atol=1e-15)

    def test_held_out_accuracy(self):
        rng = np.random.default_rng(12)
        g = random_identifiable_graph(4, rng)
        truth = truth_model(g, 2, rng)
        fr = excited_series(truth, ["default"] * 400, seed=12)
        model = identify(fr, g, 2)["default"]
        start = TimeSeriesFrame([rng.dirichlet(np.ones(4))])
        a = forecast(model, start, 10).states
        b = forecast(truth, start, 10).states
        assert np.max(np.abs(a - b)) <= 1e-3

    def test_uses_last_regime_and_rejects_unknown(self):
        A = _model([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], regime="a")
        B = _model([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]], regime="b")
        hist = TimeSeriesFrame([[0.5, 0.5], [0.5, 0.5]], regime_labels=["b"])
        tr = forecast({"a": A, "b": B}, hist, 2)
        assert tr.applied_regimes == ("b", "b")
        np.testing.assert_allclose(tr.states[-1], [0.0, 1.0])
        with pytest.raises(UnknownRegimeError):
            forecast({"a": A}, hist, 2)

    def test_unlabeled_history_with_many_models(self):
        A = _model([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], regime="a")
        with pytest.raises(ValidationError):
            forecast({"a": A, "b": A}, TimeSeriesFrame([[0.5, 0.5]]), 2)


def test_decomposition_consistency_along_trajectory():
    rng = np.random.default_rng(6)
    g = RelationalGraph.complete(3)
    m = _model(random_coupling(g, 2, rng), g, 2)
    dec = closed_loop_decompose(m)
    x = y = np.array([0.6, 0.3, 0.1])
    for _ in range(30):
        x = m.W_hat @ embed_reduced(x, m.table)
        y = dec.evaluate(y)
        assert np.max(np.abs(x - y)) <= 1e-12
