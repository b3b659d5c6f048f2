"""Complex Hermitian eigensolvers and the Hermitian-definite pencil decomposition.

The central routine, :func:`gevd_hpd`, jointly diagonalizes a Hermitian
matrix ``Phi`` against a Hermitian positive-definite matrix ``Psi``:
it returns real generalized eigenvalues ``lam`` and a matrix ``P`` whose
columns satisfy ``Phi p_k = lam_k Psi p_k`` with ``P^H Psi P = I`` and
``P^H Phi P = diag(lam)``. The construction factors ``Psi = U S U^H``,
whitens ``Phi`` into ``S^{-1/2} U^H Phi U S^{-1/2}``, eigendecomposes the
whitened matrix and maps the eigenvectors back through ``U S^{-1/2}``.

All routines are pure functions; supported matrix orders are small
(microphone counts, D <= 16).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DefinitenessError, NonHermitianError, SingularMatrixError

# Acceptance threshold for Hermitian symmetry, relative to the matrix scale.
HERMITIAN_RTOL = 1e-10

# Psi counts as positive definite iff min eigenvalue > this times trace/D.
DEFINITENESS_FLOOR = 1e-12


@dataclass
class PencilDecomposition:
    """Generalized eigenvalues (descending) and Psi-orthonormal eigenvectors.

    ``eigenvalues`` has shape (..., D); ``eigenvectors`` has shape
    (..., D, D) with eigenvector k in column ``eigenvectors[..., :, k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_hermitian(A, name):
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise NonHermitianError(f"{name} must be square, got shape {A.shape}")
    scale = np.abs(A).max(axis=(-2, -1))
    asym = np.abs(A - np.conj(np.swapaxes(A, -1, -2))).max(axis=(-2, -1))
    if np.any(asym > HERMITIAN_RTOL * np.maximum(scale, 1e-300)):
        raise NonHermitianError(
            f"{name} is not Hermitian: max asymmetry {float(np.max(asym)):.3e}"
            f" at scale {float(np.max(scale)):.3e}"
        )
    return A


def hermitian_eig(A):
    """Eigendecompose a Hermitian matrix.

    Parameters
    ----------
    A : (..., D, D) complex ndarray
        Hermitian matrix (validated; asymmetry beyond tolerance raises
        :class:`NonHermitianError`).

    Returns
    -------
    w : (..., D) float ndarray
        Real eigenvalues, sorted descending.
    U : (..., D, D) complex ndarray
        Unitary matrix with eigenvector k in column ``U[..., :, k]``, so
        ``A = U diag(w) U^H``.
    """
    A = _check_hermitian(A, "A")
    w, U = np.linalg.eigh(A)
    return w[..., ::-1].copy(), U[..., ::-1].copy()


def _fix_column_phases(P):
    # Rotate each column so its largest-magnitude entry is real positive.
    idx = np.argmax(np.abs(P), axis=-2)
    lead = np.take_along_axis(P, idx[..., None, :], axis=-2)
    mag = np.abs(lead)
    phase = np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)
    return P * np.conj(phase)


def gevd_hpd(Phi, Psi):
    """Solve the Hermitian-definite generalized eigenvalue problem.

    Parameters
    ----------
    Phi : (..., D, D) complex ndarray
        Hermitian matrix.
    Psi : (..., D, D) complex ndarray
        Hermitian positive-definite matrix. Positive definiteness is
        enforced with a floor of ``1e-12 * trace/D`` on the minimum
        eigenvalue; below that a :class:`DefinitenessError` is raised
        carrying the offending minimum eigenvalue.

    Returns
    -------
    PencilDecomposition
        Eigenvalues sorted descending. Each eigenvector column has its
        largest-magnitude entry rotated to be real positive, which pins the
        otherwise arbitrary per-column phase.
    """
    Phi = _check_hermitian(Phi, "Phi")
    Psi = _check_hermitian(Psi, "Psi")
    if Phi.shape != Psi.shape:
        raise NonHermitianError(
            f"Phi and Psi must share a shape, got {Phi.shape} and {Psi.shape}"
        )
    D = Psi.shape[-1]

    sigma, U = np.linalg.eigh(Psi)
    floor = DEFINITENESS_FLOOR * (
        np.real(np.trace(Psi, axis1=-2, axis2=-1)) / D
    )
    min_sigma = sigma[..., 0]
    if np.any(min_sigma <= floor):
        worst = float(np.min(min_sigma))
        raise DefinitenessError(
            f"Psi is not positive definite: min eigenvalue {worst:.6e}", worst
        )

    inv_sqrt = 1.0 / np.sqrt(sigma)
    # Whitened matrix S^{-1/2} U^H Phi U S^{-1/2}; re-symmetrize roundoff.
    W = np.conj(np.swapaxes(U, -1, -2)) @ Phi @ U
    W = inv_sqrt[..., :, None] * W * inv_sqrt[..., None, :]
    W = 0.5 * (W + np.conj(np.swapaxes(W, -1, -2)))

    lam, Q = np.linalg.eigh(W)
    lam = lam[..., ::-1].copy()
    Q = Q[..., ::-1]

    P = U @ (inv_sqrt[..., :, None] * Q)
    return PencilDecomposition(lam, _fix_column_phases(P))


def solve_hermitian_system(Psi, B, rtol=1e-10):
    """Solve ``Psi @ X = B`` for a nonsingular square matrix.

    ``Psi`` is typically Hermitian but any nonsingular square matrix is
    accepted; the solution is verified to residual ``rtol`` relative to
    ``||B||`` and a :class:`SingularMatrixError` is raised otherwise.
    """
    Psi = np.asarray(Psi, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    try:
        X = np.linalg.solve(Psi, B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"singular system: {exc}") from exc
    norm_b = np.linalg.norm(B)
    residual = np.linalg.norm(Psi @ X - B)
    if not np.isfinite(X).all() or residual > rtol * max(norm_b, 1e-300):
        raise SingularMatrixError(
            f"system too ill-conditioned: relative residual {residual / max(norm_b, 1e-300):.3e}"
        )
    return X
