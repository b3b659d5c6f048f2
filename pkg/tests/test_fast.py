import numpy as np
import pytest

from conftest import model_from_arrays
from oracles import dense_e_step, dense_log_likelihood, random_instance

from fastfca.conventional import e_step, fca_run, m_step
from fastfca.fast import (
    back_transform_covariances,
    back_transform_images,
    fast_e_step,
    fast_m_step_S,
    fast_m_step_v,
    fastfca_run,
    initial_pencil,
    propagate_pencil,
    transform_observations,
)
from fastfca.initializers import init_random
from fastfca.pencil import gevd_hpd


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestTransform:
    def test_identity(self, rng):
        y = random_complex(rng, (4, 3, 2))
        P = np.broadcast_to(np.eye(2, dtype=complex), (3, 2, 2)).copy()
        assert np.abs(transform_observations(y, P) - y).max() == 0.0

    def test_unitary_isometry(self, rng):
        y = random_complex(rng, (5, 2, 3))
        q, _ = np.linalg.qr(random_complex(rng, (2, 3, 3)))
        yt = transform_observations(y, q)
        assert np.linalg.norm(yt, axis=-1) == pytest.approx(
            np.linalg.norm(y, axis=-1), rel=1e-12
        )

    def test_matches_dense_product(self, rng):
        y = random_complex(rng, (6, 4, 3))
        P = random_complex(rng, (4, 3, 3))
        yt = transform_observations(y, P)
        for n in range(6):
            for f in range(4):
                oracle = P[f].conj().T @ y[n, f]
                assert np.abs(yt[n, f] - oracle).max() <= 1e-14 * np.abs(oracle).max()


class TestFastESstep:
    def test_symmetric_sources(self, rng):
        yt = random_complex(rng, (4, 2, 3))
        v = np.full((2, 4, 2), 0.8)
        lam = np.ones((2, 3))
        mu, _ = fast_e_step(yt, v, lam)
        assert np.abs(mu[0] - yt / 2).max() <= 1e-14
        assert np.abs(mu[1] - yt / 2).max() <= 1e-14

    def test_single_source_limit(self, rng):
        yt = random_complex(rng, (3, 2, 2))
        v = np.empty((2, 3, 2))
        v[0] = 1.0
        v[1] = 1e-12
        lam = np.full((2, 2), 1.3)
        mu, _ = fast_e_step(yt, v, lam)
        assert np.abs(mu[0] - yt).max() <= 1e-9 * np.abs(yt).max()
        assert np.abs(mu[1]).max() <= 1e-9 * np.abs(yt).max()

    def test_back_transform_matches_conventional(self):
        y, v, S = random_instance(21, n_frames=7, n_bins=3, n_chan=3)
        model = model_from_arrays(y, v, S)
        P, lam = initial_pencil(model)
        yt = transform_observations(y, P)
        mu_t, phi_t = fast_e_step(yt, model.v, lam)
        post = e_step(y, model)
        mu_back = back_transform_images(mu_t, P)
        assert np.abs(mu_back - post.mu).max() <= 1e-10 * np.abs(post.mu).max()
        phi_fwd = np.einsum(
            "fba,jnfbc,fcd->jnfad", P.conj(), post.Phi, P
        )
        assert np.abs(phi_fwd - phi_t).max() <= 1e-10 * np.abs(phi_t).max()


class TestFastMStep:
    def test_v_fixed_point(self):
        lam = np.array([[2.0, 0.5]])
        phi = np.zeros((2, 3, 1, 2, 2), dtype=complex)
        phi[0, :, 0] = np.diag(lam[0])
        phi[1, :, 0] = 0.7 * np.eye(2)
        v = fast_m_step_v(phi, lam)
        assert np.abs(v[0] - 1.0).max() <= 1e-14
        assert np.abs(v[1] - 0.7).max() <= 1e-14

    def test_v_matches_conventional(self):
        y, v, S = random_instance(22, n_frames=6, n_bins=2, n_chan=3)
        model = model_from_arrays(y, v, S)
        P, lam = initial_pencil(model)
        yt = transform_observations(y, P)
        _, phi_t = fast_e_step(yt, model.v, lam)
        post = e_step(y, model)
        new = m_step(post, model)
        v_fast = np.maximum(fast_m_step_v(phi_t, lam), model.v_floor[None, None, :])
        assert np.abs(v_fast - new.v).max() <= 1e-10 * new.v.max()

    def test_S_proportionality(self):
        rng = np.random.default_rng(23)
        c = random_complex(rng, (2, 2))
        c = c @ c.conj().T
        v = 0.5 + rng.random((2, 5, 1))
        phi = v[..., None, None] * c
        s_t = fast_m_step_S(phi.astype(complex), v)
        # ridge-free comparison up to the documented epsilon
        assert np.abs(s_t - c).max() <= 1e-8 * np.abs(c).max()

    def test_S_single_frame(self):
        rng = np.random.default_rng(24)
        phi = random_complex(rng, (2, 1, 2, 3, 3))
        phi = phi + np.conj(np.swapaxes(phi, -1, -2))
        v = 0.5 + rng.random((2, 1, 2))
        s_t = fast_m_step_S(phi, v)
        expected = phi[:, 0] / v[:, 0, :, None, None]
        assert np.abs(s_t - expected).max() <= 1e-8 * np.abs(expected).max()

    def test_S_back_transform_matches_conventional(self):
        y, v, S = random_instance(25, n_frames=8, n_bins=3, n_chan=2)
        model = model_from_arrays(y, v, S)
        P, lam = initial_pencil(model)
        yt = transform_observations(y, P)
        _, phi_t = fast_e_step(yt, model.v, lam)
        post = e_step(y, model)
        new = m_step(post, model)
        v_new = np.maximum(fast_m_step_v(phi_t, lam), model.v_floor[None, None, :])
        gram = np.conj(np.swapaxes(P, -1, -2)) @ P
        s_t = fast_m_step_S(phi_t, v_new, gram=gram)
        s_back = back_transform_covariances(s_t, P)
        assert np.abs(s_back - new.S).max() <= 1e-10 * np.abs(new.S).max()


class TestPropagatePencil:
    def test_already_diagonal(self, rng):
        lam = np.array([[3.0, 1.5, 0.2]])
        s1 = np.stack([np.diag(lam[0]).astype(complex)])
        s2 = np.stack([np.eye(3, dtype=complex)])
        p_prev = random_complex(rng, (1, 3, 3))
        p_next, lam_next = propagate_pencil(s1, s2, p_prev)
        assert np.allclose(lam_next, lam, atol=1e-12)
        # Q is the identity up to phase, and phases are pinned positive
        assert np.abs(p_next - p_prev).max() <= 1e-12

    def test_identity_prev_reduces_to_gevd(self, rng):
        a = random_complex(rng, (4, 4))
        s1 = np.stack([0.5 * (a + a.conj().T)])
        b = random_complex(rng, (4, 4))
        s2 = np.stack([b @ b.conj().T + np.eye(4)])
        p_next, lam_next = propagate_pencil(s1, s2, np.eye(4, dtype=complex)[None])
        dec = gevd_hpd(s1[0], s2[0])
        assert np.allclose(p_next[0], dec.eigenvectors, atol=1e-12)
        assert np.allclose(lam_next[0], dec.eigenvalues, atol=1e-12)

    def test_updated_pencil_diagonalizes_back_transformed_pair(self):
        # verify the composed basis against the explicitly back-transformed
        # covariances: P^H S_1 P = diag(lam), P^H S_2 P = I
        y, v, S = random_instance(26, n_frames=10, n_bins=2, n_chan=3)
        model = model_from_arrays(y, v, S)
        P, lam = initial_pencil(model)
        yt = transform_observations(y, P)
        _, phi_t = fast_e_step(yt, model.v, lam)
        v_new = np.maximum(fast_m_step_v(phi_t, lam), model.v_floor[None, None, :])
        gram = np.conj(np.swapaxes(P, -1, -2)) @ P
        s_t = fast_m_step_S(phi_t, v_new, gram=gram)
        p_next, lam_next = propagate_pencil(s_t[0], s_t[1], P)

        s_back = back_transform_covariances(s_t, P)
        for f in range(2):
            ph = p_next[f].conj().T
            d1 = ph @ s_back[0, f] @ p_next[f]
            d2 = ph @ s_back[1, f] @ p_next[f]
            assert np.abs(d1 - np.diag(lam_next[f])).max() <= 1e-9 * max(
                np.abs(lam_next[f]).max(), 1.0
            )
            assert np.abs(d2 - np.eye(3)).max() <= 1e-9


class TestFastFcaRun:
    def equivalence_case(self, seed, n_chan, iterations=10):
        rng = np.random.default_rng(seed)
        y = random_complex(rng, (24, 5, n_chan))
        init = init_random(y, seed=seed + 1)
        ref = fca_run(y, init, iterations, record_history=True)
        fast = fastfca_run(y, init, iterations, record_history=True)
        return ref, fast

    @pytest.mark.parametrize("n_chan", [2, 3, 4])
    def test_matches_conventional(self, n_chan):
        ref, fast = self.equivalence_case(30 + n_chan, n_chan)
        scale = np.abs(ref.images).max()
        assert np.abs(fast.images - ref.images).max() <= 1e-6 * max(scale, 1.0)
        for h_ref, h_fast in zip(ref.history, fast.history):
            assert np.abs(h_fast["v"] - h_ref["v"]).max() <= 1e-8 * h_ref["v"].max()
            assert np.abs(h_fast["S"] - h_ref["S"]).max() <= 1e-8 * np.abs(h_ref["S"]).max()

    def test_likelihood_traces_agree_and_monotone(self):
        ref, fast = self.equivalence_case(40, 3)
        assert len(fast.loglik_trace) == len(ref.loglik_trace)
        for a, b in zip(ref.loglik_trace, fast.loglik_trace):
            assert b == pytest.approx(a, rel=1e-6)
        for a, b in zip(fast.loglik_trace, fast.loglik_trace[1:]):
            assert b >= a - 1e-8 * abs(a)

    def test_fast_likelihood_identity_against_dense_oracle(self):
        # the diagonalized likelihood expression must equal the dense formula
        y, v, S = random_instance(41, n_frames=9, n_bins=3, n_chan=3)
        model = model_from_arrays(y, v, S)
        fast = fastfca_run(y, model, iterations=3, record_history=True)
        assert fast.loglik_trace[0] == pytest.approx(
            dense_log_likelihood(y, model.v, model.S), rel=1e-10
        )
        for l, h in enumerate(fast.history):
            assert fast.loglik_trace[l + 1] == pytest.approx(
                dense_log_likelihood(y, h["v"], h["S"]), rel=1e-10
            )

    def test_zero_iterations_returns_init_posterior(self):
        y, v, S = random_instance(42, n_frames=5, n_bins=2, n_chan=2)
        model = model_from_arrays(y, v, S)
        fast = fastfca_run(y, model, iterations=0)
        mu_o, _ = dense_e_step(y, model.v, model.S)
        assert np.abs(fast.images - mu_o).max() <= 1e-10 * np.abs(mu_o).max()

    def test_inner_loop_free_of_matrix_ops(self):
        y, v, S = random_instance(43, n_frames=6, n_bins=4, n_chan=3)
        model = model_from_arrays(y, v, S)
        fast = fastfca_run(y, model, iterations=5)
        assert fast.op_counts.frame_matrix_inversions == 0
        assert fast.op_counts.frame_matrix_products == 0
        assert fast.op_counts.bin_gevd_count == 5 * 4  # once per bin per iteration

    def test_incremental_transform_close_to_literal(self):
        y, v, S = random_instance(44, n_frames=8, n_bins=3, n_chan=2)
        model = model_from_arrays(y, v, S)
        lit = fastfca_run(y, model, iterations=6)
        inc = fastfca_run(y, model, iterations=6, incremental_transform=True)
        scale = np.abs(lit.images).max()
        assert np.abs(inc.images - lit.images).max() <= 1e-8 * scale

    def test_partition_preserved_by_back_transform(self):
        y, v, S = random_instance(45, n_frames=7, n_bins=3, n_chan=3)
        model = model_from_arrays(y, v, S)
        fast = fastfca_run(y, model, iterations=4)
        resid = fast.images[0] + fast.images[1] - y
        assert np.abs(resid).max() <= 1e-9 * np.abs(y).max()
