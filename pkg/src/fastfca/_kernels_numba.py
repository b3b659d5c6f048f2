"""Numba-compiled kernels, signature-compatible with ``_kernels_numpy``.

The per-frame loops are written out explicitly so the compiled code works on
small I-by-I blocks without batching temporaries. Operation counters are
incremented inside the loops next to the work they tally.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _fca_e_step(y, v, S):
    n_frames, n_bins, order = y.shape
    mu = np.empty((2, n_frames, n_bins, order), dtype=np.complex128)
    Phi = np.empty((2, n_frames, n_bins, order, order), dtype=np.complex128)
    R = np.empty((order, order), dtype=np.complex128)
    A1 = np.empty((order, order), dtype=np.complex128)
    A2 = np.empty((order, order), dtype=np.complex128)
    inversions = 0
    products = 0
    for f in range(n_bins):
        S1 = np.ascontiguousarray(S[0, f])
        S2 = np.ascontiguousarray(S[1, f])
        for n in range(n_frames):
            v1 = v[0, n, f]
            v2 = v[1, n, f]
            for a in range(order):
                for b in range(order):
                    R[a, b] = v1 * S1[a, b] + v2 * S2[a, b]
            Rinv = np.linalg.inv(R)
            inversions += 1
            # A_j = S_j R^{-1}
            for a in range(order):
                for b in range(order):
                    acc1 = 0.0 + 0.0j
                    acc2 = 0.0 + 0.0j
                    for c in range(order):
                        acc1 += S1[a, c] * Rinv[c, b]
                        acc2 += S2[a, c] * Rinv[c, b]
                    A1[a, b] = acc1
                    A2[a, b] = acc2
            products += 2
            for a in range(order):
                acc1 = 0.0 + 0.0j
                acc2 = 0.0 + 0.0j
                for b in range(order):
                    acc1 += A1[a, b] * y[n, f, b]
                    acc2 += A2[a, b] * y[n, f, b]
                mu[0, n, f, a] = v1 * acc1
                mu[1, n, f, a] = v2 * acc2
            # cross = v1 v2 A1 S2, shared by both sources
            for a in range(order):
                for b in range(order):
                    acc = 0.0 + 0.0j
                    for c in range(order):
                        acc += A1[a, c] * S2[c, b]
                    cross = v1 * v2 * acc
                    Phi[0, n, f, a, b] = (
                        mu[0, n, f, a] * np.conj(mu[0, n, f, b]) + cross
                    )
                    Phi[1, n, f, a, b] = (
                        mu[1, n, f, a] * np.conj(mu[1, n, f, b]) + cross
                    )
            products += 1
    return mu, Phi, inversions, products


def fca_e_step(y, v, S):
    return _fca_e_step(
        np.ascontiguousarray(y), np.ascontiguousarray(v), np.ascontiguousarray(S)
    )


@njit(cache=True)
def _fca_v_trace(Phi, Sinv):
    n_frames, n_bins, order = Phi.shape[1], Phi.shape[2], Phi.shape[3]
    v = np.empty((2, n_frames, n_bins))
    for j in range(2):
        for f in range(n_bins):
            M = np.ascontiguousarray(Sinv[j, f])
            for n in range(n_frames):
                acc = 0.0
                for a in range(order):
                    for b in range(order):
                        acc += (M[a, b] * Phi[j, n, f, b, a]).real
                v[j, n, f] = acc / order
    return v


def fca_v_update(Phi, S_prev):
    L = np.linalg.cholesky(S_prev)
    Linv = np.linalg.inv(L)
    Sinv = np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    return _fca_v_trace(np.ascontiguousarray(Phi), np.ascontiguousarray(Sinv))


@njit(cache=True)
def _fca_S_update(Phi, v):
    n_frames, n_bins, order = Phi.shape[1], Phi.shape[2], Phi.shape[3]
    S = np.zeros((2, n_bins, order, order), dtype=np.complex128)
    for j in range(2):
        for f in range(n_bins):
            for n in range(n_frames):
                w = 1.0 / v[j, n, f]
                for a in range(order):
                    for b in range(order):
                        S[j, f, a, b] += w * Phi[j, n, f, a, b]
    return S / n_frames


def fca_S_update(Phi, v):
    return _fca_S_update(np.ascontiguousarray(Phi), np.ascontiguousarray(v))


@njit(cache=True)
def _fca_log_likelihood(y, v, S):
    n_frames, n_bins, order = y.shape
    R = np.empty((order, order), dtype=np.complex128)
    total = -n_frames * n_bins * order * np.log(np.pi)
    for f in range(n_bins):
        S1 = np.ascontiguousarray(S[0, f])
        S2 = np.ascontiguousarray(S[1, f])
        for n in range(n_frames):
            v1 = v[0, n, f]
            v2 = v[1, n, f]
            for a in range(order):
                for b in range(order):
                    R[a, b] = v1 * S1[a, b] + v2 * S2[a, b]
            sign, logdet = np.linalg.slogdet(R)
            x = np.linalg.solve(R, np.ascontiguousarray(y[n, f]))
            quad = 0.0
            for a in range(order):
                quad += (np.conj(y[n, f, a]) * x[a]).real
            total += -logdet - quad
    return total


def fca_log_likelihood(y, v, S):
    return float(
        _fca_log_likelihood(
            np.ascontiguousarray(y), np.ascontiguousarray(v), np.ascontiguousarray(S)
        )
    )


@njit(cache=True)
def _fast_transform(y, P):
    n_frames, n_bins, order = y.shape
    yt = np.empty_like(y)
    for f in range(n_bins):
        for n in range(n_frames):
            for a in range(order):
                acc = 0.0 + 0.0j
                for b in range(order):
                    acc += np.conj(P[f, b, a]) * y[n, f, b]
                yt[n, f, a] = acc
    return yt


def fast_transform(y, P):
    return _fast_transform(np.ascontiguousarray(y), np.ascontiguousarray(P))


@njit(cache=True)
def _fast_e_step(yt, v, lam):
    n_frames, n_bins, order = yt.shape
    mu = np.empty((2, n_frames, n_bins, order), dtype=np.complex128)
    Phi = np.empty((2, n_frames, n_bins, order, order), dtype=np.complex128)
    for f in range(n_bins):
        for n in range(n_frames):
            v1 = v[0, n, f]
            v2 = v[1, n, f]
            for a in range(order):
                den = v1 * lam[f, a] + v2
                mu[0, n, f, a] = (v1 * lam[f, a] / den) * yt[n, f, a]
                mu[1, n, f, a] = (v2 / den) * yt[n, f, a]
            for a in range(order):
                for b in range(order):
                    Phi[0, n, f, a, b] = mu[0, n, f, a] * np.conj(mu[0, n, f, b])
                    Phi[1, n, f, a, b] = mu[1, n, f, a] * np.conj(mu[1, n, f, b])
                den = v1 * lam[f, a] + v2
                cross = v1 * v2 * lam[f, a] / den
                Phi[0, n, f, a, a] += cross
                Phi[1, n, f, a, a] += cross
    return mu, Phi


def fast_e_step(yt, v, lam):
    mu, Phi = _fast_e_step(
        np.ascontiguousarray(yt), np.ascontiguousarray(v), np.ascontiguousarray(lam)
    )
    return mu, Phi, 0, 0


@njit(cache=True)
def _fast_v_update(Phi_t, lam):
    n_frames, n_bins, order = Phi_t.shape[1], Phi_t.shape[2], Phi_t.shape[3]
    v = np.empty((2, n_frames, n_bins))
    for f in range(n_bins):
        for n in range(n_frames):
            acc1 = 0.0
            acc2 = 0.0
            for a in range(order):
                acc1 += Phi_t[0, n, f, a, a].real / lam[f, a]
                acc2 += Phi_t[1, n, f, a, a].real
            v[0, n, f] = acc1 / order
            v[1, n, f] = acc2 / order
    return v


def fast_v_update(Phi_t, lam):
    return _fast_v_update(np.ascontiguousarray(Phi_t), np.ascontiguousarray(lam))


def fast_S_update(Phi_t, v):
    return _fca_S_update(np.ascontiguousarray(Phi_t), np.ascontiguousarray(v))


@njit(cache=True)
def _fast_log_likelihood(yt, v, lam, logdet2):
    n_frames, n_bins, order = yt.shape
    total = -n_frames * n_bins * order * np.log(np.pi)
    for f in range(n_bins):
        total += n_frames * logdet2[f]
        for n in range(n_frames):
            v1 = v[0, n, f]
            v2 = v[1, n, f]
            for a in range(order):
                den = v1 * lam[f, a] + v2
                total -= np.log(den) + (np.abs(yt[n, f, a]) ** 2) / den
    return total


def fast_log_likelihood(yt, v, lam, logdet2):
    return float(
        _fast_log_likelihood(
            np.ascontiguousarray(yt),
            np.ascontiguousarray(v),
            np.ascontiguousarray(lam),
            np.ascontiguousarray(logdet2),
        )
    )


@njit(cache=True)
def _fca_iteration(y, v, S, Sinv, floor):
    n_frames, n_bins, order = y.shape
    mu = np.empty((2, n_frames, n_bins, order), dtype=np.complex128)
    v_new = np.empty((2, n_frames, n_bins))
    S_new = np.zeros((2, n_bins, order, order), dtype=np.complex128)
    R = np.empty((order, order), dtype=np.complex128)
    A1 = np.empty((order, order), dtype=np.complex128)
    A2 = np.empty((order, order), dtype=np.complex128)
    cross = np.empty((order, order), dtype=np.complex128)
    inversions = 0
    products = 0
    for f in range(n_bins):
        S1 = np.ascontiguousarray(S[0, f])
        S2 = np.ascontiguousarray(S[1, f])
        Si1 = np.ascontiguousarray(Sinv[0, f])
        Si2 = np.ascontiguousarray(Sinv[1, f])
        for n in range(n_frames):
            v1 = v[0, n, f]
            v2 = v[1, n, f]
            for a in range(order):
                for b in range(order):
                    R[a, b] = v1 * S1[a, b] + v2 * S2[a, b]
            Rinv = np.linalg.inv(R)
            inversions += 1
            for a in range(order):
                for b in range(order):
                    acc1 = 0.0 + 0.0j
                    acc2 = 0.0 + 0.0j
                    for c in range(order):
                        acc1 += S1[a, c] * Rinv[c, b]
                        acc2 += S2[a, c] * Rinv[c, b]
                    A1[a, b] = acc1
                    A2[a, b] = acc2
            products += 2
            for a in range(order):
                acc1 = 0.0 + 0.0j
                acc2 = 0.0 + 0.0j
                for b in range(order):
                    acc1 += A1[a, b] * y[n, f, b]
                    acc2 += A2[a, b] * y[n, f, b]
                mu[0, n, f, a] = v1 * acc1
                mu[1, n, f, a] = v2 * acc2
            for a in range(order):
                for b in range(order):
                    acc = 0.0 + 0.0j
                    for c in range(order):
                        acc += A1[a, c] * S2[c, b]
                    cross[a, b] = v1 * v2 * acc
            products += 1
            # v_j = tr(Sinv_j Phi_j)/I, Phi_j = mu_j mu_j^H + cross
            tr1 = 0.0
            tr2 = 0.0
            for a in range(order):
                for b in range(order):
                    phi1 = mu[0, n, f, b] * np.conj(mu[0, n, f, a]) + cross[b, a]
                    phi2 = mu[1, n, f, b] * np.conj(mu[1, n, f, a]) + cross[b, a]
                    tr1 += (Si1[a, b] * phi1).real
                    tr2 += (Si2[a, b] * phi2).real
            w1 = max(tr1 / order, floor[f])
            w2 = max(tr2 / order, floor[f])
            v_new[0, n, f] = w1
            v_new[1, n, f] = w2
            for a in range(order):
                for b in range(order):
                    phi1 = mu[0, n, f, a] * np.conj(mu[0, n, f, b]) + cross[a, b]
                    phi2 = mu[1, n, f, a] * np.conj(mu[1, n, f, b]) + cross[a, b]
                    S_new[0, f, a, b] += phi1 / w1
                    S_new[1, f, a, b] += phi2 / w2
    return mu, v_new, S_new / n_frames, inversions, products


def fca_iteration(y, v, S, Sinv, floor):
    return _fca_iteration(
        np.ascontiguousarray(y),
        np.ascontiguousarray(v),
        np.ascontiguousarray(S),
        np.ascontiguousarray(Sinv),
        np.ascontiguousarray(floor),
    )


@njit(cache=True)
def _fast_iteration(y, P, v, lam, floor):
    n_frames, n_bins, order = y.shape
    mu = np.empty((2, n_frames, n_bins, order), dtype=np.complex128)
    v_new = np.empty((2, n_frames, n_bins))
    S_new = np.zeros((2, n_bins, order, order), dtype=np.complex128)
    m1 = np.empty(order, dtype=np.complex128)
    m2 = np.empty(order, dtype=np.complex128)
    cdiag = np.empty(order)
    for f in range(n_bins):
        Pf = np.ascontiguousarray(P[f])
        lam_f = lam[f]
        floor_f = floor[f]
        S1f = S_new[0, f]
        S2f = S_new[1, f]
        for n in range(n_frames):
            v1 = v[0, n, f]
            v2 = v[1, n, f]
            tr1 = 0.0
            tr2 = 0.0
            for a in range(order):
                acc = 0.0 + 0.0j
                for b in range(order):
                    acc += np.conj(Pf[b, a]) * y[n, f, b]
                la = lam_f[a]
                den = v1 * la + v2
                g1 = v1 * la / den
                g2 = v2 / den
                ya = acc
                m1[a] = g1 * ya
                m2[a] = g2 * ya
                c = v2 * g1
                cdiag[a] = c
                p_yy = ya.real * ya.real + ya.imag * ya.imag
                tr1 += (g1 * g1 * p_yy + c) / la
                tr2 += g2 * g2 * p_yy + c
            w1 = max(tr1 / order, floor_f)
            w2 = max(tr2 / order, floor_f)
            v_new[0, n, f] = w1
            v_new[1, n, f] = w2
            iw1 = 1.0 / w1
            iw2 = 1.0 / w2
            for a in range(order):
                mu[0, n, f, a] = m1[a]
                mu[1, n, f, a] = m2[a]
                m1a = m1[a] * iw1
                m2a = m2[a] * iw2
                for b in range(order):
                    S1f[a, b] += m1a * np.conj(m1[b])
                    S2f[a, b] += m2a * np.conj(m2[b])
                S1f[a, a] += cdiag[a] * iw1
                S2f[a, a] += cdiag[a] * iw2
    return mu, v_new, S_new / n_frames


def fast_iteration(y, P, v, lam, floor):
    mu, v_new, S_raw = _fast_iteration(
        np.ascontiguousarray(y),
        np.ascontiguousarray(P),
        np.ascontiguousarray(v),
        np.ascontiguousarray(lam),
        np.ascontiguousarray(floor),
    )
    return mu, v_new, S_raw, 0, 0


def warmup():
    """Compile every kernel on a tiny instance (first call is the slow one)."""
    rng = np.random.default_rng(0)
    y = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
    v = np.abs(rng.standard_normal((2, 2, 2))) + 0.5
    S = np.stack([np.eye(2, dtype=np.complex128)] * 2)[:, None].repeat(2, axis=1)
    P = np.stack([np.eye(2, dtype=np.complex128)] * 2)
    lam = np.ones((2, 2))
    mu, Phi, _, _ = fca_e_step(y, v, S)
    fca_v_update(Phi, S)
    fca_S_update(Phi, v)
    fca_log_likelihood(y, v, S)
    yt = fast_transform(y, P)
    _, Phi_t, _, _ = fast_e_step(yt, v, lam)
    fast_v_update(Phi_t, lam)
    fast_S_update(Phi_t, v)
    fast_log_likelihood(yt, v, lam, np.zeros(2))
    floor = np.full(2, 1e-12)
    fca_iteration(y, v, S, S, floor)
    fast_iteration(y, P, v, lam, floor)
