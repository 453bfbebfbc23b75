import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vgaeplus.errors import NumericError, ValidationError
from vgaeplus.graph import induced_subgraph, split_nodes
from vgaeplus.model import TrainConfig
from vgaeplus.synthetic import planted_partition
from vgaeplus.tuning import (
    N_INITIAL,
    BoState,
    GaussianProcess,
    expected_improvement,
    mock_objective,
    tune_weights,
    validation_objective,
    write_tuning_trace,
)

SMALL = dict(epochs=40, embedding_dim=16, hidden_dim=32)


def _bumpy(w):
    a, b, g = w
    return np.sin(4 * a) + np.cos(3 * b) * g + 0.5 * g**2


def _design(seed, n=12):
    x = np.random.default_rng(seed).random((n, 3))
    return x, np.array([_bumpy(r) for r in x])


class TestGaussianProcess:
    @pytest.mark.parametrize("seed", range(3))
    def test_interpolates_noiseless_points(self, seed):
        x, y = _design(seed)
        gp = GaussianProcess.fit(x, y, seed=seed, noise=1e-10)
        mu, _ = gp.predict(x)
        np.testing.assert_allclose(mu, y, atol=1e-6, rtol=0)

    def test_predictive_sd_grows_away_from_data(self):
        x, y = _design(0)
        gp = GaussianProcess.fit(x, y, noise=1e-10)
        _, sd_near = gp.predict(x[:1])
        _, sd_far = gp.predict(np.array([[5.0, 5.0, 5.0]]))
        assert sd_near[0] < sd_far[0]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_ei_nonnegative(self, seed):
        x, y = _design(seed % 50, n=9)
        gp = GaussianProcess.fit(x, y, seed=seed)
        xs = np.random.default_rng(seed).random((200, 3))
        assert np.all(expected_improvement(gp, xs, y.min()) >= 0.0)

    def test_ei_zero_at_evaluated_noiseless_points(self):
        x, y = _design(4)
        gp = GaussianProcess.fit(x, y, noise=1e-10)
        np.testing.assert_array_equal(expected_improvement(gp, x, y.min()), 0.0)

    def test_fit_is_deterministic(self):
        x, y = _design(1)
        a, b = GaussianProcess.fit(x, y, seed=3), GaussianProcess.fit(x, y, seed=3)
        np.testing.assert_array_equal(a.theta, b.theta)


class TestTuneWeights:
    def test_budget_below_initial_design_rejected(self):
        with pytest.raises(ValidationError):
            tune_weights(mock_objective, budget=N_INITIAL - 1)

    @pytest.mark.parametrize("budget", [8, 12])
    def test_never_exceeds_budget(self, budget):
        calls = []

        def counted(w):
            calls.append(w)
            return mock_objective(w)

        _, state = tune_weights(counted, budget=budget, seed=1)
        assert len(calls) == budget == len(state.points)

    def test_trace_and_box(self):
        best, state = tune_weights(mock_objective, budget=14, seed=2)
        assert all(0.0 <= v <= 1.0 for v in best)
        running = [row[-1] for row in state.trace()]
        assert all(b <= a for a, b in zip(running, running[1:]))
        assert best == state.best[0]
        assert mock_objective(best) == min(state.values)

    def test_deterministic_given_seed(self):
        a, sa = tune_weights(mock_objective, budget=11, seed=7)
        b, sb = tune_weights(mock_objective, budget=11, seed=7)
        assert a == b and sa.values == sb.values

    def test_mock_minimum_recovered(self):
        best, _ = tune_weights(mock_objective, budget=25, seed=0)
        assert max(abs(u - v) for u, v in zip(best, (0.3, 0.7, 0.5))) < 0.1

    def test_state_rejects_bad_points(self):
        s = BoState(budget=8, seed=0)
        with pytest.raises(ValidationError):
            s.add((1.1, 0.0, 0.0), 1.0)
        with pytest.raises(NumericError):
            s.add((0.1, 0.0, 0.0), float("nan"))

    def test_trace_csv(self, tmp_path):
        _, state = tune_weights(mock_objective, budget=9, seed=0)
        write_tuning_trace(state, tmp_path / "trace.csv")
        rows = list(csv.DictReader(open(tmp_path / "trace.csv")))
        assert list(rows[0]) == ["iteration", "alpha", "beta", "gamma", "objective", "best_so_far"]
        assert len(rows) == 9
        assert float(rows[-1]["best_so_far"]) == state.best[1]


class TestValidationObjective:
    @pytest.fixture(scope="class")
    @classmethod
    def graphs(cls):
        out = []
        for s in range(5):
            g = planted_partition(n_nodes=100, seed=s)
            sp = split_nodes(g, s)
            out.append((induced_subgraph(g, sp.train), induced_subgraph(g, sp.validation), s))
        return out

    def test_finite_positive_and_repeatable(self, graphs):
        tr, va, s = graphs[0]
        cfg = TrainConfig(seed=s, **SMALL)
        w = tuple(np.random.default_rng(0).random(3))
        v = validation_objective(w, tr, va, cfg)
        assert np.isfinite(v) and v > 0
        assert validation_objective(w, tr, va, cfg) == v

    def test_weights_outside_box(self, graphs):
        tr, va, _ = graphs[0]
        with pytest.raises(ValidationError):
            validation_objective((0.5, -0.1, 0.5), tr, va, TrainConfig(**SMALL))

    def test_all_zero_weights_no_better_than_tuned(self, graphs):
        zero, tuned = [], []
        for tr, va, s in graphs:
            cfg = TrainConfig(seed=s, **SMALL)
            f = lambda w: validation_objective(w, tr, va, cfg)  # noqa: E731
            _, state = tune_weights(f, budget=10, seed=s)
            tuned.append(state.best[1])
            zero.append(f((0.0, 0.0, 0.0)))
        assert np.mean(zero) >= np.mean(tuned)
