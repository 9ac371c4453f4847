"""Configuration validation, serialization, and chain-state invariants."""

import numpy as np
import pytest

from monoreg import ChainState, ModelConfig, build_basis_set, evaluate_f, initial_state

from conftest import toy_dataset


class TestModelConfig:
    def test_documented_defaults(self):
        cfg = ModelConfig()
        assert cfg.order == 50
        assert cfg.base_mean == 0.5
        assert cfg.base_sd == 0.25
        assert cfg.intercept_sd == 10.0
        assert cfg.sigma_shape == 0.1 and cfg.sigma_rate == 0.1
        assert cfg.pi_a == 1.0 and cfg.pi_b == 1.0
        assert cfg.alpha_shape == 1.0 and cfg.alpha_rate == 1.0
        assert (cfg.n_iter, cfg.n_burn, cfg.thin) == (50_000, 25_000, 10)

    @pytest.mark.parametrize(
        "bad",
        [
            dict(base_sd=0.0),
            dict(base_sd=-1.0),
            dict(intercept_sd=0.0),
            dict(sigma_shape=0.0),
            dict(pi_a=-2.0),
            dict(n_iter=100, n_burn=100),
            dict(n_iter=100, n_burn=200),
            dict(thin=0),
            dict(init="hot"),
            dict(order=0),
            dict(urn_count="people"),
        ],
    )
    def test_validation_rejects(self, bad):
        with pytest.raises(ValueError):
            ModelConfig(**bad)

    def test_file_round_trip(self, tmp_path):
        cfg = ModelConfig(order=20, n_iter=500, n_burn=100, thin=2, seed=99,
                          base_sd=0.4, random_scan=True, dp_clustering=False)
        path = tmp_path / "run.cfg"
        cfg.to_file(path)
        assert ModelConfig.from_file(path) == cfg

    def test_from_mapping_rejects_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key"):
            ModelConfig.from_mapping({"banana": 1})

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            ModelConfig.from_file(tmp_path / "nope.cfg")


class TestInitialState:
    def test_null_init(self):
        data = toy_dataset(n=30)
        cfg = ModelConfig(order=10, n_iter=10, n_burn=5, thin=1)
        state = initial_state(cfg, data)
        assert np.all(state.labels == 0)
        assert state.eta == {}
        np.testing.assert_allclose(state.theta[1:], 0.0)
        assert state.theta[0] == pytest.approx(0.0, abs=1e-12)
        assert state.sigma2 == 1.0 and state.alpha == 1.0

    def test_warm_init_gives_line_through_data(self):
        # the shared increment must reproduce the straight line with slope
        # order * value via the curve evaluation
        data = toy_dataset(n=50, slope=2.0, noise=0.05)
        cfg = ModelConfig(order=12, init="warm", n_iter=10, n_burn=5, thin=1)
        state = initial_state(cfg, data)
        value = state.eta[1]
        assert value == pytest.approx(max(0.01, np.ptp(data.y) / 12))
        basis = build_basis_set(data.x, 12)
        line = state.theta[0] + 12 * value * data.x
        np.testing.assert_allclose(evaluate_f(basis, state.theta), line, atol=1e-10)

    def test_reconstruction_matches_exactly(self):
        data = toy_dataset()
        cfg = ModelConfig(order=8, init="warm", n_iter=10, n_burn=5, thin=1)
        state = initial_state(cfg, data)
        np.testing.assert_array_equal(state.reconstructed_theta(), state.theta)


class TestChainStateValidate:
    def _valid_state(self):
        theta = np.array([0.5, 0.2, 0.0, 0.2])
        labels = np.array([1, 0, 1], dtype=np.int64)
        return ChainState(theta=theta, labels=labels, eta={1: 0.2}, sigma2=1.0, alpha=1.0)

    def test_accepts_consistent_state(self):
        self._valid_state().validate()

    def test_rejects_value_mismatch(self):
        state = self._valid_state()
        state.theta[1] = 0.3
        with pytest.raises(ValueError):
            state.validate()

    def test_rejects_dangling_cluster(self):
        state = self._valid_state()
        state.eta[2] = 0.7
        with pytest.raises(ValueError):
            state.validate()

    def test_rejects_noncompact_ids(self):
        theta = np.array([0.0, 0.4, 0.0, 0.0])
        labels = np.array([5, 0, 0], dtype=np.int64)
        state = ChainState(theta=theta, labels=labels, eta={5: 0.4})
        with pytest.raises(ValueError):
            state.validate()

    def test_rejects_nonpositive_cluster_value(self):
        state = self._valid_state()
        state.eta[1] = -0.2
        state.theta[1] = -0.2
        state.theta[3] = -0.2
        with pytest.raises(ValueError):
            state.validate()
