"""Reference EM engine for the full-rank spatial covariance model.

The mixture at each time-frequency point is modeled as the sum of two
zero-mean complex Gaussian source images with covariances
``v_j(n, f) * S_j(f)``. This module is the straightforward per-frame
transcription of that model's EM updates: the E-step inverts the mixture
covariance at every (n, f), which is exactly the cost the fast engine
removes. Keep it that way; it is the baseline and the correctness oracle.
"""

import time

import numpy as np

from . import _backend
from .errors import SingularMixtureError
from .modelops import regularize_covariances
from .types import OpCounts, PosteriorMoments, SeparationResult, SpatialModel


def _data(y):
    if isinstance(y, np.ndarray):
        return np.asarray(y, dtype=np.complex128)
    return np.asarray(y.data, dtype=np.complex128)


def _locate_singular(y, model):
    """Name the (frame, bin) whose mixture covariance broke the solve."""
    R = (
        model.v[0][..., None, None] * model.S[0]
        + model.v[1][..., None, None] * model.S[1]
    )
    sign, logdet = np.linalg.slogdet(R)
    bad = ~np.isfinite(logdet) | (np.abs(sign) < 0.5)
    if not bad.any():
        bad = logdet <= np.nanmin(logdet) + 1e-12
    n, f = np.argwhere(bad)[0]
    return int(n), int(f)


def log_likelihood(y, model):
    """Total mixture log-likelihood over all time-frequency points.

    Sum over (n, f) of ``-I log(pi) - log det(R) - y^H R^{-1} y`` with
    ``R = v_1 S_1 + v_2 S_2``.
    """
    y = _data(y)
    try:
        value = _backend.kernels().fca_log_likelihood(y, model.v, model.S)
    except np.linalg.LinAlgError:
        n, f = _locate_singular(y, model)
        raise SingularMixtureError(n, f) from None
    if not np.isfinite(value):
        n, f = _locate_singular(y, model)
        raise SingularMixtureError(n, f)
    return value


def e_step(y, model, counts=None):
    """Posterior means and second moments of both source images.

    Per (n, f) with ``R = sum_k v_k S_k``:
    ``mu_j = v_j S_j R^{-1} y`` and
    ``Phi_j = mu_j mu_j^H + v_1 S_1 R^{-1} v_2 S_2``
    (the cross term is the same for both sources).
    """
    y = _data(y)
    try:
        mu, Phi, inversions, products = _backend.kernels().fca_e_step(
            y, model.v, model.S
        )
    except np.linalg.LinAlgError:
        n, f = _locate_singular(y, model)
        raise SingularMixtureError(n, f) from None
    if not np.isfinite(mu).all():
        n, f = _locate_singular(y, model)
        raise SingularMixtureError(n, f)
    if counts is not None:
        counts.add(inversions=inversions, products=products)
    return PosteriorMoments(mu=mu, Phi=Phi)


def m_step(posterior, model_prev):
    """Re-estimate powers and spatial covariances from posterior moments.

    The power update traces the posterior second moment against the
    previous iteration's covariance; the covariance update then averages
    the second moments weighted by the new powers. Powers are floored and
    covariances re-symmetrized plus ridged afterwards.
    """
    kern = _backend.kernels()
    v = kern.fca_v_update(posterior.Phi, model_prev.S)
    v = np.maximum(v, model_prev.v_floor[None, None, :])
    S = regularize_covariances(kern.fca_S_update(posterior.Phi, v))
    return SpatialModel(v=v, S=S, v_floor=model_prev.v_floor)


def _cholesky_inverse(S):
    L = np.linalg.cholesky(S)
    Linv = np.linalg.inv(L)
    return np.conj(np.swapaxes(Linv, -1, -2)) @ Linv


def fca_run(y, init, iterations, record_history=False, compute_likelihood=True):
    """Run the reference EM for ``iterations`` passes and extract MMSE images.

    Each iteration runs a fused E+M kernel (same per-point arithmetic as
    :func:`e_step` followed by :func:`m_step`, without materializing the
    posterior second moments for all time-frequency points at once). The
    returned images are the posterior means computed in the final E-step
    (the parameters produced by the last M-step are returned in ``model``
    but are not used for extraction; with zero iterations the images are
    the posterior means under the initial parameters). ``em_seconds``
    times the E/M work only; likelihood evaluation and history recording
    happen outside the timed sections.
    """
    y_arr = _data(y)
    kern = _backend.kernels()
    model = init.copy()
    counts = OpCounts()
    trace = []
    history = []
    iter_seconds = []

    if compute_likelihood:
        trace.append(log_likelihood(y_arr, model))

    mu = None
    for _ in range(int(iterations)):
        t0 = time.perf_counter()
        Sinv = _cholesky_inverse(model.S)
        try:
            mu, v_new, S_raw, inversions, products = kern.fca_iteration(
                y_arr, model.v, model.S, Sinv, model.v_floor
            )
        except np.linalg.LinAlgError:
            n, f = _locate_singular(y_arr, model)
            raise SingularMixtureError(n, f) from None
        model = SpatialModel(
            v=v_new, S=regularize_covariances(S_raw), v_floor=model.v_floor
        )
        iter_seconds.append(time.perf_counter() - t0)
        counts.add(inversions=inversions, products=products)
        if not np.isfinite(mu).all():
            n, f = _locate_singular(y_arr, model)
            raise SingularMixtureError(n, f)
        if compute_likelihood:
            trace.append(log_likelihood(y_arr, model))
        if record_history:
            history.append({"v": model.v.copy(), "S": model.S.copy()})

    if mu is None:
        mu = e_step(y_arr, model, counts=counts).mu

    return SeparationResult(
        algorithm="FCA",
        images=mu,
        loglik_trace=trace,
        iteration_seconds=iter_seconds,
        em_seconds=float(sum(iter_seconds)),
        op_counts=counts,
        model=model,
        history=history,
    )
