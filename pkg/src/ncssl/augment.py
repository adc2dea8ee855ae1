"""Second-moment models of data plus augmentation, and a view-pair sampler.

A model carries ``sigma_s`` (correlation of a single augmented view, the
``X + X'`` of the flow equations) and ``sigma_d`` (correlation between two
views of the same datum, ``X``).  Analysis code uses these closed forms; the
sampler exists for the discrete-time trainer.
"""
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionError, SingularityError, ValidationError

PSD_TOL = 1e-10
ORTHONORMAL_TOL = 1e-10
INVERSE_FLOOR = 1e-12

KINDS = ("isotropic", "multiplicative", "additive")


@dataclass(frozen=True)
class AugmentationModel:
    sigma_s: np.ndarray
    sigma_d: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.sigma_s.shape[0]

    @property
    def x_aug(self):
        """Augmentation covariance ``X' = sigma_s - sigma_d``."""
        return self.sigma_s - self.sigma_d

    def isotropic_sigma2(self, tol=1e-12):
        """Return sigma^2 if ``sigma_d = I`` and ``sigma_s = (1 + sigma^2) I``, else None."""
        n = self.dim
        eye = np.eye(n)
        if np.max(np.abs(self.sigma_d - eye)) > tol:
            return None
        c = self.sigma_s[0, 0]
        if np.max(np.abs(self.sigma_s - c * eye)) > tol:
            return None
        return float(c - 1.0)


def _check_psd(m, name):
    lam = linalg.sym_eigen(m).eigenvalues
    if lam.size and lam[-1] < -PSD_TOL * max(1.0, abs(lam[0])):
        raise ValidationError(f"{name} is not PSD (min eigenvalue {lam[-1]:.3e})")


def _validated(sigma_s, sigma_d, kind, params):
    _check_psd(sigma_s, "sigma_s")
    _check_psd(sigma_s - sigma_d, "sigma_s - sigma_d")
    return AugmentationModel(sigma_s, sigma_d, kind, params)


def isotropic_model(n, sigma2):
    """Identity data covariance with isotropic augmentation noise ``sigma2 * I``."""
    if n < 1:
        raise DimensionError("dimension must be at least 1")
    if sigma2 < 0:
        raise ValidationError("sigma2 must be non-negative")
    eye = np.eye(n)
    return AugmentationModel((1.0 + sigma2) * eye, eye.copy(), "isotropic",
                             {"sigma_x": eye.copy(), "sigma_n": sigma2 * eye, "sigma2": float(sigma2)})


def multiplicative_model(sigma_x, u):
    """Subspace scrambling: views are ``(P^c + U B U^T) x`` with Gaussian ``B``.

    ``u`` holds ``k`` orthonormal columns spanning the scrambled subspace; its
    complement ``P^c = I - U U^T`` is preserved exactly by every augmentation.
    """
    sigma_x = linalg.as_matrix(sigma_x, "sigma_x")
    n = sigma_x.shape[0]
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        u = np.zeros((n, 0))
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.shape[0] != n:
        raise DimensionError(f"U has {u.shape[0]} rows, expected {n}")
    k = u.shape[1]
    err = float(np.linalg.norm(u.T @ u - np.eye(k))) if k else 0.0
    if err > ORTHONORMAL_TOL:
        raise ValidationError(f"U columns are not orthonormal: ||U^T U - I||_F = {err:.3e}")
    _check_psd(sigma_x, "sigma_x")
    pc = np.eye(n) - u @ u.T
    sigma_d = linalg.symmetric_part(pc @ sigma_x @ pc)
    return _validated(sigma_x.copy(), sigma_d, "multiplicative", {"sigma_x": sigma_x.copy(), "U": u.copy(), "Pc": pc})


def additive_model(sigma_x, sigma_n):
    """Additive Gaussian noise with covariance ``sigma_n`` on top of data covariance ``sigma_x``."""
    sigma_x = linalg.as_matrix(sigma_x, "sigma_x")
    sigma_n = linalg.as_matrix(sigma_n, "sigma_n")
    if sigma_x.shape != sigma_n.shape or sigma_x.shape[0] != sigma_x.shape[1]:
        raise DimensionError(f"shape mismatch {sigma_x.shape} vs {sigma_n.shape}")
    _check_psd(sigma_x, "sigma_x")
    _check_psd(sigma_n, "sigma_n")
    return _validated(sigma_x + sigma_n, sigma_x.copy(), "additive", {"sigma_x": sigma_x.copy(), "sigma_n": sigma_n.copy()})


def sigma_s_inverse(model):
    eig = linalg.sym_eigen(model.sigma_s)
    lam = eig.eigenvalues
    if lam[0] <= 0.0 or lam[-1] <= INVERSE_FLOOR * lam[0]:
        cond = np.inf if lam[-1] <= 0.0 else lam[0] / lam[-1]
        raise SingularityError("sigma_s is singular", cond)
    return eig.apply(lambda x: 1.0 / x)


def alignment_operator(model):
    """``sigma_d @ inv(sigma_s)``; its top eigenmodes carry the non-collapsed fixed points."""
    return model.sigma_d @ sigma_s_inverse(model)


def top_left_eigvecs(model, k):
    """Orthonormal basis (n, k) for the span of the top-k left eigenvectors of the alignment operator.

    Left eigenvectors of ``sigma_d S^{-1}`` are ``S^{-1/2} y`` for eigenvectors
    ``y`` of the symmetric ``S^{-1/2} sigma_d S^{-1/2}``, so only a symmetric
    eigenproblem is needed.
    """
    eig_s = linalg.sym_eigen(model.sigma_s)
    lam = eig_s.eigenvalues
    if lam[-1] <= INVERSE_FLOOR * lam[0]:
        raise SingularityError("sigma_s is singular", np.inf if lam[-1] <= 0 else lam[0] / lam[-1])
    s_inv_half = eig_s.apply(lambda x: 1.0 / np.sqrt(x))
    sym = linalg.symmetric_part(s_inv_half @ model.sigma_d @ s_inv_half)
    y = linalg.sym_eigen(sym).eigenvectors[:, :k]
    q, _ = np.linalg.qr(s_inv_half @ y)
    return q


def random_orthonormal(n, k, rng):
    """``k`` orthonormal columns from QR of a Gaussian matrix."""
    if k == 0:
        return np.zeros((n, 0))
    q, r = np.linalg.qr(rng.standard_normal((n, k)))
    return q * np.sign(np.diag(r))


def make_rng(seed):
    """Counter-based (Philox) generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(int(seed)))


class ViewSampler:
    """Draws pairs of augmented views; square-root factors are computed once per model.

    Data are drawn from ``N(0, sigma_x)``.  Isotropic and additive models add
    independent ``N(0, X')`` noise to each view.  The multiplicative model maps
    each view through ``P^c + U B U^T`` with ``B`` i.i.d. Gaussian of variance
    ``1/k``, so ``E[x1 x1^T] = sigma_x`` whenever ``sigma_x`` is isotropic and
    commutes with the projector.
    """

    def __init__(self, model):
        if model.kind not in KINDS:
            raise ValidationError(f"unknown model kind {model.kind!r}")
        self.model = model
        params = model.params
        self._sx_half = linalg.psd_sqrt(params.get("sigma_x", np.eye(model.dim)))
        self._noise_half = linalg.psd_sqrt(params["sigma_n"]) if model.kind != "multiplicative" else None

    def draw(self, rng, count):
        """Return two arrays of shape (count, n)."""
        n = self.model.dim
        x = rng.standard_normal((count, n)) @ self._sx_half
        if self._noise_half is not None:
            x1 = x + rng.standard_normal((count, n)) @ self._noise_half
            x2 = x + rng.standard_normal((count, n)) @ self._noise_half
            return x1, x2
        u = self.model.params["U"]
        k = u.shape[1]
        keep = x @ self.model.params["Pc"]
        if k == 0:
            return keep, keep.copy()
        z = x @ u  # (count, k) coordinates in the scrambled subspace
        views = []
        for _ in range(2):
            b = rng.standard_normal((count, k, k)) / np.sqrt(k)
            views.append(keep + np.einsum("bij,bj->bi", b, z) @ u.T)
        return views[0], views[1]


def sample_view_pairs(model, rng, count):
    """Draw ``count`` pairs of augmented views; see :class:`ViewSampler`."""
    return ViewSampler(model).draw(rng, count)


def sample_view_pair(model, rng):
    x1, x2 = sample_view_pairs(model, rng, 1)
    return x1[0], x2[0]


def build_model(kind, dim, sigma2=0.0, scramble_k=0, noise_scale=0.0, seed=0):
    """Construct a model from the flat config keys used by the command-line harness.

    ``multiplicative`` uses identity data and a random ``scramble_k``-dimensional
    scrambled subspace drawn from ``seed``; ``additive`` uses identity data with
    noise variances ``noise_scale * j / dim`` for ``j = 1..dim``.
    """
    if kind == "isotropic":
        return isotropic_model(dim, sigma2)
    if kind == "multiplicative":
        if not 0 <= scramble_k <= dim:
            raise ValidationError("scramble_k must lie in [0, dim]")
        u = random_orthonormal(dim, scramble_k, make_rng(seed))
        return multiplicative_model(np.eye(dim), u)
    if kind == "additive":
        variances = noise_scale * np.arange(1, dim + 1) / dim
        return additive_model(np.eye(dim), np.diag(variances))
    raise ValidationError(f"unknown model kind {kind!r}; expected one of {KINDS}")
