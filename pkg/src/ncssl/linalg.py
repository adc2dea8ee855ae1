"""Dense real linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  The symmetric
eigensolver is a cyclic Jacobi method; sweeps visit the off-diagonal pairs in
round-robin order so each round applies ``n // 2`` disjoint rotations at once.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DimensionError, ValidationError

OFF_DIAGONAL_RTOL = 1e-12
MAX_SWEEPS = 100
SYMMETRY_RTOL = 1e-8
SIGN_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return ``a`` as a 2-D float64 array, rejecting NaN/Inf entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def _square(a, name):
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending; column ``j`` of ``eigenvectors`` pairs with ``eigenvalues[j]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self):
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T

    def apply(self, fn):
        """Return ``U diag(fn(eigenvalues)) U^T``."""
        u = self.eigenvectors
        return (u * fn(self.eigenvalues)) @ u.T


@lru_cache(maxsize=64)
def _round_robin(n):
    # circle method; index n is a bye when n is odd
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        p = np.array([a for a, _ in pairs], dtype=np.intp)
        q = np.array([b for _, b in pairs], dtype=np.intp)
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_norm(a):
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def sym_eigen(s, max_sweeps=MAX_SWEEPS, rtol=OFF_DIAGONAL_RTOL):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    s : array_like, (n, n)
        Symmetric matrix.  Asymmetry up to ``1e-8 * ||s||_F`` is removed by
        averaging with the transpose.
    max_sweeps : int
        Sweep budget before :class:`ConvergenceError` is raised.
    rtol : float
        Stop once the off-diagonal Frobenius norm is below ``rtol * ||s||_F``.

    Returns
    -------
    EigenDecomposition
        Eigenvalues in non-increasing order.  Each eigenvector's first entry
        with magnitude above ``1e-12`` is positive.
    """
    a = _square(s, "S")
    norm = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * norm:
        raise ValidationError("S is not symmetric within 1e-8 relative tolerance")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    threshold = rtol * norm
    sweeps = 0
    if n > 1:
        rounds = _round_robin(n)
        off = _off_norm(a)
        while off > threshold:
            if sweeps >= max_sweeps:
                raise ConvergenceError("Jacobi eigensolver did not converge", off, sweeps)
            for p, q in rounds:
                apq = a[p, q]
                active = apq != 0.0
                if not np.any(active):
                    continue
                safe = np.where(active, apq, 1.0)
                # a tiny pivot overflows theta to inf, giving t = 0 (no rotation needed)
                with np.errstate(over="ignore"):
                    theta = (a[q, q] - a[p, p]) / (2.0 * safe)
                    t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(1.0, theta))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.hypot(1.0, t)
                sn = t * c
                ap, aq = a[:, p], a[:, q]
                a[:, p] = c * ap - sn * aq
                a[:, q] = sn * ap + c * aq
                ap, aq = a[p, :], a[q, :]
                cc, ss = c[:, None], sn[:, None]
                a[p, :] = cc * ap - ss * aq
                a[q, :] = ss * ap + cc * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p], v[:, q]
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
            sweeps += 1
            off = _off_norm(a)
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    for j in range(n):
        col = v[:, j]
        idx = np.flatnonzero(np.abs(col) > SIGN_TOL)
        if idx.size and col[idx[0]] < 0.0:
            v[:, j] = -col
    return EigenDecomposition(w, v, sweeps)


def min_eigenvalue(s):
    return float(sym_eigen(s).eigenvalues[-1])


def commutator(a, b):
    """``[A, B] = AB - BA``."""
    a = _square(a, "A")
    b = _square(b, "B")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b - b @ a


def anticommutator(a, b):
    """``{A, B} = AB + BA``."""
    a = _square(a, "A")
    b = _square(b, "B")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a @ b + b @ a


def kronecker_sum(a, b):
    """``I (x) A + B (x) I`` with the identities sized to ``B`` and ``A`` respectively."""
    a = _square(a, "A")
    b = _square(b, "B")
    return np.kron(np.eye(b.shape[0]), a) + np.kron(b, np.eye(a.shape[0]))


def vec(m):
    """Column-stacking vectorization, so ``vec(A X B) = (B^T kron A) vec(X)``."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v, rows, cols):
    return np.asarray(v).reshape((rows, cols), order="F")


def symmetric_part(m):
    m = np.asarray(m)
    return 0.5 * (m + m.T)


def psd_sqrt(s, clip=-1e-10):
    """Symmetric square root of a PSD matrix; eigenvalues in ``[clip, 0)`` are treated as zero."""
    eig = sym_eigen(s)
    lam = eig.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    if lam.size and lam[-1] < clip * scale:
        raise ValidationError(f"matrix is not PSD: eigenvalue {lam[-1]:.3e}")
    return eig.apply(lambda x: np.sqrt(np.clip(x, 0.0, None)))


def is_psd(s, tol=1e-10):
    lam = sym_eigen(s).eigenvalues
    return bool(lam.size == 0 or lam[-1] >= -tol * max(1.0, float(np.max(np.abs(lam)))))
