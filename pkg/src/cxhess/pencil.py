"""Hermitian pencil (g, alpha): relative eigenvalues, frames, linearization.

The pencil is reduced by Cholesky whitening: alpha = C C^H, and the
eigenvalues of A = alpha^{-1} g are those of the Hermitian matrix
C^{-1} g C^{-H}.  Batched helpers take arrays of shape (..., n, n) so the
solver can process every grid node at once.
"""
from dataclasses import dataclass

import numpy as np

from . import symfun
from .errors import ConeViolationError, DomainError, MetricError

HERMITIAN_TOL = 1e-12
MAX_CONDITION = 1e10
MIN_EIGENVALUE = 1e-12


@dataclass
class PencilState:
    a_matrix: np.ndarray
    spectrum: np.ndarray
    frame: np.ndarray
    whitener: np.ndarray
    eigvecs: np.ndarray
    l_coeffs: np.ndarray = None

    @property
    def n(self):
        return self.spectrum.shape[-1]


def hermitian(matrix, tol=HERMITIAN_TOL):
    a = np.asarray(matrix, dtype=complex)
    if a.shape[-1] != a.shape[-2]:
        raise DomainError(f"matrix must be square, got shape {a.shape}")
    if np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))), initial=0.0) > tol:
        raise DomainError("matrix is not Hermitian")
    return a


def check_metric(alpha):
    """Raise MetricError unless every matrix in ``alpha`` is SPD and well conditioned."""
    ev = np.linalg.eigvalsh(alpha)
    lo, hi = ev[..., 0], ev[..., -1]
    if np.any(lo <= MIN_EIGENVALUE):
        raise MetricError(f"metric not positive definite (min eigenvalue {np.min(lo):.3e})")
    cond = np.max(hi / lo)
    if cond > MAX_CONDITION:
        raise MetricError(f"metric condition number {cond:.3e} exceeds {MAX_CONDITION:g}")


def whitener(alpha):
    """C^{-1} with alpha = C C^H, batched."""
    c = np.linalg.cholesky(alpha)
    eye = np.broadcast_to(np.eye(alpha.shape[-1], dtype=complex), alpha.shape)
    return np.linalg.solve(c, eye)


def whitened_spectra(g, cinv):
    """Ascending eigenvalues and eigenvectors of C^{-1} g C^{-H}."""
    a = cinv @ g @ np.conj(np.swapaxes(cinv, -1, -2))
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    return np.linalg.eigh(a)


def linearization(cinv, q, f):
    """L = C^{-H} Q diag(f) Q^H C^{-1}; satisfies dF = tr(L dg)."""
    y = q.conj().swapaxes(-1, -2) @ cinv
    return np.conj(np.swapaxes(y, -1, -2)) @ (f[..., :, None] * y)


def relative_eigen(g, alpha):
    g = hermitian(g)
    alpha = hermitian(alpha)
    if g.shape != alpha.shape or g.ndim != 2:
        raise DomainError("g and alpha must be n x n matrices of equal size")
    check_metric(alpha)
    cinv = whitener(alpha)
    lam, q = whitened_spectra(g, cinv)
    c = np.linalg.cholesky(alpha)
    y = c @ q
    return PencilState(
        a_matrix=np.linalg.solve(alpha, g),
        spectrum=lam,
        frame=y.T,
        whitener=cinv,
        eigvecs=q,
    )


def linearized_coeffs(state, m):
    lam = state.spectrum
    k = symfun.first_cone_failure(lam, m)
    if k is not None:
        raise ConeViolationError(f"spectrum outside Gamma_{m}: S_{k} <= 0", index=k)
    vals = symfun.hessian_f(lam, m)
    state.l_coeffs = linearization(state.whitener, state.eigvecs, vals.f_partials)
    return state.l_coeffs


def det_pencil_bound(state, m):
    """((det A)^{1/n}, S_m(lambda)^{1/m}).

    By Maclaurin, lhs <= maclaurin_constant(n, m) * rhs with equality for
    proportional spectra.
    """
    lam = state.spectrum
    if np.any(lam <= 0):
        raise DomainError("det_pencil_bound needs a positive spectrum")
    n = lam.size
    lhs = float(np.prod(lam) ** (1.0 / n))
    rhs = float(symfun.elementary_symmetric(lam, m) ** (1.0 / m))
    return lhs, rhs
