"""Pure-numpy kernels for the per-frame EM work of both engines.

Every function takes and returns plain ndarrays:

* ``y``      (N, F, I)    complex observations
* ``v``      (2, N, F)    real source powers
* ``S``      (2, F, I, I) complex spatial covariances
* ``P``      (F, I, I)    complex per-bin basis
* ``lam``    (F, I)       real generalized eigenvalues

Kernels also return the number of frame-wise I-by-I matrix inversions and
matrix-matrix products they performed, tallied at the call sites that do the
work.
"""

import numpy as np


def fca_e_step(y, v, S):
    """Posterior means and second moments with explicit frame-wise inverses."""
    n_frames, n_bins, _ = y.shape
    R = v[0][..., None, None] * S[0] + v[1][..., None, None] * S[1]
    Rinv = np.linalg.inv(R)
    inversions = n_frames * n_bins

    # A_j = S_j R^{-1}: one frame-wise matrix product per source
    A1 = np.einsum("fab,nfbc->nfac", S[0], Rinv)
    A2 = np.einsum("fab,nfbc->nfac", S[1], Rinv)
    mu1 = v[0][..., None] * np.einsum("nfab,nfb->nfa", A1, y)
    mu2 = v[1][..., None] * np.einsum("nfab,nfb->nfa", A2, y)
    # shared cross term v1 S1 R^{-1} v2 S2: a third frame-wise product
    cross = (v[0] * v[1])[..., None, None] * np.einsum("nfab,fbc->nfac", A1, S[1])
    products = 3 * n_frames * n_bins

    Phi1 = mu1[..., :, None] * mu1[..., None, :].conj() + cross
    Phi2 = mu2[..., :, None] * mu2[..., None, :].conj() + cross
    return np.stack([mu1, mu2]), np.stack([Phi1, Phi2]), inversions, products


def fca_v_update(Phi, S_prev):
    """Power update: trace of S_prev^{-1} Phi over I, via per-bin Cholesky."""
    order = Phi.shape[-1]
    L = np.linalg.cholesky(S_prev)
    Linv = np.linalg.inv(L)
    Sinv = np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    return np.einsum("jfab,jnfba->jnf", Sinv, Phi).real / order


def fca_S_update(Phi, v):
    """Covariance update: per-bin average of Phi weighted by 1/v."""
    n_frames = Phi.shape[1]
    return np.einsum("jnfab,jnf->jfab", Phi, 1.0 / v) / n_frames


def fca_log_likelihood(y, v, S):
    """Dense Gaussian log-likelihood of the mixture under the model."""
    order = y.shape[-1]
    R = v[0][..., None, None] * S[0] + v[1][..., None, None] * S[1]
    _, logdet = np.linalg.slogdet(R)
    quad = np.einsum(
        "nfa,nfa->nf", y.conj(), np.linalg.solve(R, y[..., None])[..., 0]
    ).real
    return float(np.sum(-order * np.log(np.pi) - logdet - quad))


def fast_transform(y, P):
    """Basis transform P^H y per frame (matrix-vector only)."""
    return np.einsum("fba,nfb->nfa", P.conj(), y)


def fast_e_step(yt, v, lam):
    """Diagonalized posterior update: scalar weights plus one rank-one outer."""
    order = yt.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        den = v[0][..., None] * lam[None] + v[1][..., None]
        mu1 = (v[0][..., None] * lam[None] / den) * yt
        mu2 = (v[1][..., None] / den) * yt
        cross_diag = (v[0] * v[1])[..., None] * lam[None] / den

    Phi1 = mu1[..., :, None] * mu1[..., None, :].conj()
    Phi2 = mu2[..., :, None] * mu2[..., None, :].conj()
    rng = np.arange(order)
    Phi1[..., rng, rng] += cross_diag
    Phi2[..., rng, rng] += cross_diag
    return np.stack([mu1, mu2]), np.stack([Phi1, Phi2]), 0, 0


def fast_v_update(Phi_t, lam):
    """Power update from diagonal entries only."""
    order = Phi_t.shape[-1]
    rng = np.arange(order)
    diag = Phi_t[..., rng, rng].real
    v1 = np.sum(diag[0] / lam[None], axis=-1) / order
    v2 = np.sum(diag[1], axis=-1) / order
    return np.stack([v1, v2])


def fast_S_update(Phi_t, v):
    """Transformed covariance update: per-bin average of Phi_t over 1/v."""
    n_frames = Phi_t.shape[1]
    return np.einsum("jnfab,jnf->jfab", Phi_t, 1.0 / v) / n_frames


def fast_log_likelihood(yt, v, lam, logdet2):
    """Mixture log-likelihood in the diagonalized basis.

    ``logdet2`` is log|det P|^2 per bin; the dense log-determinant of the
    mixture covariance equals sum_i log(v1 lam_i + v2) - logdet2.
    """
    n_frames, _, order = yt.shape
    with np.errstate(divide="ignore", invalid="ignore"):
        den = v[0][..., None] * lam[None] + v[1][..., None]
        total = -n_frames * yt.shape[1] * order * np.log(np.pi)
        total += n_frames * np.sum(logdet2)
        total -= np.sum(np.log(den))
        total -= np.sum(np.abs(yt) ** 2 / den)
    return float(total)


def fca_iteration(y, v, S, Sinv, floor):
    """Fused E+M pass of the conventional engine.

    Same per-point arithmetic as ``fca_e_step`` + the M-step updates, but
    the posterior second moments are consumed on the fly instead of being
    materialized for all (n, f). ``Sinv`` is the per-bin inverse of the
    previous covariances. Returns the posterior means, floored new powers
    and the raw (unregularized) covariance update.
    """
    n_frames, n_bins, order = y.shape
    R = v[0][..., None, None] * S[0] + v[1][..., None, None] * S[1]
    Rinv = np.linalg.inv(R)
    inversions = n_frames * n_bins

    A1 = np.einsum("fab,nfbc->nfac", S[0], Rinv)
    A2 = np.einsum("fab,nfbc->nfac", S[1], Rinv)
    mu1 = v[0][..., None] * np.einsum("nfab,nfb->nfa", A1, y)
    mu2 = v[1][..., None] * np.einsum("nfab,nfb->nfa", A2, y)
    cross = (v[0] * v[1])[..., None, None] * np.einsum("nfab,fbc->nfac", A1, S[1])
    products = 3 * n_frames * n_bins

    # v_j = tr(Sinv_j Phi_j)/I with Phi_j = mu_j mu_j^H + cross
    quad1 = np.einsum("fab,nfb,nfa->nf", Sinv[0], mu1, mu1.conj()).real
    quad2 = np.einsum("fab,nfb,nfa->nf", Sinv[1], mu2, mu2.conj()).real
    tr_cross1 = np.einsum("fab,nfba->nf", Sinv[0], cross).real
    tr_cross2 = np.einsum("fab,nfba->nf", Sinv[1], cross).real
    v_new = np.stack([(quad1 + tr_cross1), (quad2 + tr_cross2)]) / order
    v_new = np.maximum(v_new, floor[None, None, :])

    # S_j = (1/N) sum_n Phi_j / v_j
    w1 = 1.0 / v_new[0]
    w2 = 1.0 / v_new[1]
    S1 = np.einsum("nfa,nfb,nf->fab", mu1, mu1.conj(), w1)
    S2 = np.einsum("nfa,nfb,nf->fab", mu2, mu2.conj(), w2)
    S1 = (S1 + np.einsum("nfab,nf->fab", cross, w1)) / n_frames
    S2 = (S2 + np.einsum("nfab,nf->fab", cross, w2)) / n_frames
    return (
        np.stack([mu1, mu2]),
        v_new,
        np.stack([S1, S2]),
        inversions,
        products,
    )


def fast_iteration(y, P, v, lam, floor):
    """Fused transform + E + M pass of the diagonalized engine.

    Per (n, f): basis transform (matrix-vector), scalar posterior weights,
    power update from diagonal entries, and accumulation of the rank-one
    transformed covariance update. No per-frame matrix inversion or
    matrix-matrix product anywhere.
    """
    order = y.shape[-1]
    n_frames = y.shape[0]
    yt = np.einsum("fba,nfb->nfa", P.conj(), y)
    with np.errstate(divide="ignore", invalid="ignore"):
        den = v[0][..., None] * lam[None] + v[1][..., None]
        mu1 = (v[0][..., None] * lam[None] / den) * yt
        mu2 = (v[1][..., None] / den) * yt
        cdiag = (v[0] * v[1])[..., None] * lam[None] / den

        v1 = np.sum((np.abs(mu1) ** 2 + cdiag) / lam[None], axis=-1) / order
        v2 = np.sum(np.abs(mu2) ** 2 + cdiag, axis=-1) / order
        v_new = np.maximum(np.stack([v1, v2]), floor[None, None, :])

        w1 = 1.0 / v_new[0]
        w2 = 1.0 / v_new[1]
    S1 = np.einsum("nfa,nfb,nf->fab", mu1, mu1.conj(), w1)
    S2 = np.einsum("nfa,nfb,nf->fab", mu2, mu2.conj(), w2)
    rng = np.arange(order)
    S1[:, rng, rng] += np.einsum("nfa,nf->fa", cdiag, w1)
    S2[:, rng, rng] += np.einsum("nfa,nf->fa", cdiag, w2)
    return np.stack([mu1, mu2]), v_new, np.stack([S1, S2]) / n_frames, 0, 0
