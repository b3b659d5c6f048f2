import numpy as np
import pytest

from conftest import model_from_arrays
from oracles import dense_e_step, dense_log_likelihood, dense_m_step, random_instance

from fastfca.conventional import e_step, fca_run, log_likelihood, m_step
from fastfca.errors import SingularMixtureError
from fastfca.initializers import init_random
from fastfca.types import SpatialModel


def scalar_model(v1, v2, n_frames=1, n_bins=1):
    v = np.empty((2, n_frames, n_bins))
    v[0] = v1
    v[1] = v2
    S = np.ones((2, n_bins, 1, 1), dtype=complex)
    return SpatialModel(v=v, S=S, v_floor=np.full(n_bins, 1e-12))


class TestLogLikelihood:
    def test_scalar_zero_observation(self):
        y = np.zeros((1, 1, 1), dtype=complex)
        model = scalar_model(0.5, 0.5)
        assert log_likelihood(y, model) == pytest.approx(-np.log(np.pi), abs=1e-12)

    def test_scalar_formula(self):
        rng = np.random.default_rng(0)
        y = (rng.standard_normal((4, 3, 1)) + 1j * rng.standard_normal((4, 3, 1)))
        v1 = 0.3 + rng.random((4, 3))
        v2 = 0.1 + rng.random((4, 3))
        model = scalar_model(v1, v2, 4, 3)
        expected = np.sum(
            -np.log(np.pi) - np.log(v1 + v2) - np.abs(y[..., 0]) ** 2 / (v1 + v2)
        )
        assert log_likelihood(y, model) == pytest.approx(expected, rel=1e-12)
        # scaling both powers changes the value in the predicted way
        model2 = scalar_model(2 * v1, 2 * v2, 4, 3)
        expected2 = np.sum(
            -np.log(np.pi) - np.log(2 * (v1 + v2)) - np.abs(y[..., 0]) ** 2 / (2 * (v1 + v2))
        )
        assert log_likelihood(y, model2) == pytest.approx(expected2, rel=1e-12)

    def test_matches_dense_oracle(self):
        y, v, S = random_instance(3, n_frames=3, n_bins=2, n_chan=2)
        model = model_from_arrays(y, v, S)
        assert log_likelihood(y, model) == pytest.approx(
            dense_log_likelihood(y, model.v, model.S), rel=1e-10
        )

    def test_singular_mixture_names_point(self):
        y = np.ones((2, 2, 2), dtype=complex)
        v = np.full((2, 2, 2), 1.0)
        S = np.zeros((2, 2, 2, 2), dtype=complex)
        S[:, :] = np.eye(2)
        S[:, 1] = 0.0  # bin 1 singular everywhere
        model = SpatialModel(v=v, S=S, v_floor=np.full(2, 1e-12))
        with pytest.raises(SingularMixtureError) as exc:
            log_likelihood(y, model)
        assert exc.value.bin == 1


class TestEStep:
    def test_degenerate_source_dominance(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((5, 2, 2)) + 1j * rng.standard_normal((5, 2, 2))
        v = np.empty((2, 5, 2))
        v[0] = 1.0
        v[1] = 1e-8
        S = np.zeros((2, 2, 2, 2), dtype=complex)
        S[:, :] = np.eye(2)
        model = SpatialModel(v=v, S=S, v_floor=np.full(2, 1e-20))
        post = e_step(y, model)
        assert np.abs(post.mu[0] - y).max() <= 1e-6 * np.abs(y).max()
        assert np.abs(post.mu[1]).max() <= 1e-6 * np.abs(y).max()

    def test_scalar_wiener_weight(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((3, 2, 1)) + 1j * rng.standard_normal((3, 2, 1))
        v1 = 0.5 + rng.random((3, 2))
        v2 = 0.2 + rng.random((3, 2))
        model = scalar_model(v1, v2, 3, 2)
        post = e_step(y, model)
        expected = (v1 / (v1 + v2))[..., None] * y
        assert np.abs(post.mu[0] - expected).max() <= 1e-12

    def test_matches_dense_oracle(self):
        y, v, S = random_instance(4)
        model = model_from_arrays(y, v, S)
        post = e_step(y, model)
        mu_o, phi_o = dense_e_step(y, model.v, model.S)
        assert np.abs(post.mu - mu_o).max() <= 1e-12 * np.abs(mu_o).max()
        assert np.abs(post.Phi - phi_o).max() <= 1e-12 * np.abs(phi_o).max()

    def test_posterior_partition(self):
        y, v, S = random_instance(5, n_frames=8, n_bins=4, n_chan=3)
        model = model_from_arrays(y, v, S)
        post = e_step(y, model)
        resid = post.mu[0] + post.mu[1] - y
        assert np.abs(resid).max() <= 1e-10 * np.abs(y).max()

    def test_posterior_second_moment_hermitian_psd(self):
        y, v, S = random_instance(6, n_chan=3)
        model = model_from_arrays(y, v, S)
        post = e_step(y, model)
        sym = post.Phi - np.conj(np.swapaxes(post.Phi, -1, -2))
        assert np.abs(sym).max() <= 1e-10 * np.abs(post.Phi).max()
        eigs = np.linalg.eigvalsh(post.Phi)
        assert eigs.min() >= -1e-10 * np.abs(post.Phi).max()

    def test_singular_error_names_point(self):
        y = np.ones((3, 2, 2), dtype=complex)
        v = np.full((2, 3, 2), 1.0)
        v[:, 1, 0] = 0.0  # frame 1, bin 0 has zero total power
        S = np.zeros((2, 2, 2, 2), dtype=complex)
        S[:, :] = np.eye(2)
        model = SpatialModel(v=v, S=S, v_floor=np.full(2, 0.0))
        with pytest.raises(SingularMixtureError) as exc:
            e_step(y, model)
        assert (exc.value.frame, exc.value.bin) == (1, 0)


class TestMStep:
    def test_fixed_point(self):
        # Phi_j = c * S_j for all frames -> v_j = c, S_j unchanged
        rng = np.random.default_rng(7)
        n_chan = 3
        a = rng.standard_normal((n_chan, n_chan)) + 1j * rng.standard_normal((n_chan, n_chan))
        S_one = a @ a.conj().T + np.eye(n_chan)
        S = np.stack([S_one[None], (2 * S_one)[None]])  # (2, 1, I, I)
        c = 1.7
        Phi = np.stack(
            [np.broadcast_to(c * S[j, 0], (5, 1, n_chan, n_chan)) for j in range(2)]
        )
        from fastfca.types import PosteriorMoments

        model_prev = SpatialModel(
            v=np.ones((2, 5, 1)), S=S, v_floor=np.full(1, 1e-15)
        )
        new = m_step(PosteriorMoments(mu=None, Phi=Phi), model_prev)
        assert np.abs(new.v - c).max() <= 1e-12
        assert np.abs(new.S - S).max() <= 1e-8 * np.abs(S).max()

    def test_scalar_reduction(self):
        Phi = np.full((2, 4, 1, 1, 1), 2.5, dtype=complex)
        from fastfca.types import PosteriorMoments

        model_prev = scalar_model(1.0, 1.0, 4, 1)
        new = m_step(PosteriorMoments(mu=None, Phi=Phi), model_prev)
        assert np.abs(new.v - 2.5).max() <= 1e-12
        assert np.abs(new.S - 1.0).max() <= 1e-8

    def test_matches_dense_oracle(self):
        y, v, S = random_instance(8)
        model = model_from_arrays(y, v, S)
        post = e_step(y, model)
        new = m_step(post, model)
        v_o, S_o = dense_m_step(post.Phi, model.S, y.shape[-1])
        assert np.abs(new.v - np.maximum(v_o, model.v_floor)).max() <= 1e-12 * v_o.max()
        # production S carries the documented symmetrize+ridge post-pass
        from fastfca.modelops import regularize_covariances

        assert np.abs(new.S - regularize_covariances(S_o)).max() <= 1e-12 * np.abs(S_o).max()

    def test_covariances_stay_hermitian_pd(self):
        y, v, S = random_instance(9, n_frames=10, n_bins=3, n_chan=3)
        model = model_from_arrays(y, v, S)
        for _ in range(3):
            post = e_step(y, model)
            model = m_step(post, model)
            asym = model.S - np.conj(np.swapaxes(model.S, -1, -2))
            assert np.abs(asym).max() == 0.0
            assert np.linalg.eigvalsh(model.S).min() > 0


class TestFcaRun:
    def test_single_iteration_improves_likelihood(self):
        y, v, S = random_instance(10, n_frames=12, n_bins=4, n_chan=2)
        model = model_from_arrays(y, v, S)
        result = fca_run(y, model, iterations=1)
        assert len(result.loglik_trace) == 2
        assert result.loglik_trace[1] >= result.loglik_trace[0] - 1e-8 * abs(
            result.loglik_trace[0]
        )

    def test_monotone_trace(self):
        y, v, S = random_instance(11, n_frames=16, n_bins=5, n_chan=3)
        model = model_from_arrays(y, v, S)
        result = fca_run(y, model, iterations=8)
        trace = result.loglik_trace
        for a, b in zip(trace, trace[1:]):
            assert b >= a - 1e-8 * abs(a)

    def test_zero_iterations_returns_init_posterior(self):
        y, v, S = random_instance(12)
        model = model_from_arrays(y, v, S)
        result = fca_run(y, model, iterations=0)
        post = e_step(y, model)
        assert np.abs(result.images - post.mu).max() <= 1e-14

    def test_scalar_pipeline_is_wiener_filter(self):
        # I=1: the whole EM reduces to per-bin scalar Wiener filtering
        rng = np.random.default_rng(13)
        y = rng.standard_normal((20, 4, 1)) + 1j * rng.standard_normal((20, 4, 1))
        model = init_random(y, seed=3)
        result = fca_run(y, model, iterations=4)

        v = model.v.copy()
        S = model.S[:, :, 0, 0].real.copy()  # (2, F)
        floor = model.v_floor
        from fastfca.modelops import COV_EPS_FACTOR

        mu = None
        for _ in range(4):
            r = v[0] * S[0][None] + v[1] * S[1][None]
            mu = np.stack([v[j] * S[j][None] / r * y[..., 0] for j in range(2)])
            phi = np.abs(mu) ** 2 + (v[0] * S[0][None]) * (v[1] * S[1][None]) / r
            v = np.maximum(phi / S[:, None, :], floor[None, None, :])
            S = (phi / v).mean(axis=1)
            S = S + COV_EPS_FACTOR * S
        # images are the posterior means from the final E-step
        assert np.abs(result.images[..., 0] - mu).max() <= 1e-9 * np.abs(mu).max()
        assert np.abs(result.model.v - v).max() <= 1e-9 * v.max()

    def test_op_counts_are_per_frame(self):
        y, v, S = random_instance(14, n_frames=6, n_bins=3, n_chan=2)
        model = model_from_arrays(y, v, S)
        result = fca_run(y, model, iterations=2)
        n_points = 6 * 3
        assert result.op_counts.frame_matrix_inversions == 2 * n_points
        assert result.op_counts.frame_matrix_products == 3 * 2 * n_points
