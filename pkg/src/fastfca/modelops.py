"""Shared helpers for building and maintaining spatial models."""

import numpy as np

# Lower bound on source power spectra, relative to mean mixture power per bin.
V_FLOOR_FACTOR = 1e-10

# Ridge added to spatial covariances after each M-step, relative to trace/I.
COV_EPS_FACTOR = 1e-9


def power_floor(y):
    """Per-bin floor for the source power spectra.

    ``V_FLOOR_FACTOR`` times the mean mixture power per bin, where power is
    the squared norm of the observation divided by the channel count.
    """
    y = np.asarray(y)
    n_chan = y.shape[-1]
    mean_power = np.mean(np.sum(np.abs(y) ** 2, axis=-1), axis=0) / n_chan
    return V_FLOOR_FACTOR * mean_power


def hermitize(S):
    """Average a stack of matrices with their conjugate transposes."""
    return 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))


def regularize_covariances(S):
    """Re-symmetrize covariance estimates and add a trace-scaled ridge.

    The EM covariance update preserves positive definiteness only in exact
    arithmetic; the ridge ``COV_EPS_FACTOR * trace/I`` keeps the matrices
    safely definite under roundoff.
    """
    S = hermitize(S)
    order = S.shape[-1]
    eps = COV_EPS_FACTOR * np.real(np.trace(S, axis1=-2, axis2=-1)) / order
    return S + eps[..., None, None] * np.eye(order)
