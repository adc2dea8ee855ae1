"""Directly set linear predictor from a running feature correlation, plus a toy trainer.

The trainer runs minibatch SGD on the stop-gradient regression loss of the
two-layer linear model with synthetic view pairs.  The predictor is trained
by gradient (``gradient``), set from the eigendecomposition of the running
estimate ``F_hat`` (``directpred``), a mix of the two (``hybrid``), or pinned
to the identity (``identity``, the no-predictor ablation).

Features are raw linear outputs; no feature normalization is applied.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .augment import AugmentationModel, ViewSampler, make_rng, top_left_eigvecs
from .errors import DimensionError, DivergenceError, ValidationError
from .matrix_flow import DIVERGENCE_NORM, Hyperparams
from .record import TrajectoryRecord
from .scalar_flow import fixed_points

PREDICTOR_MODES = ("gradient", "directpred", "hybrid", "identity")
NEG_EIG_TOL = 1e-10
ROUNDOFF_FLOOR = 64 * np.finfo(float).eps
TRACE_COLUMNS = ("loss", "min_eig_F", "max_eig_F", "surviving_modes", "subspace_cos", "balance_residual")


@dataclass(frozen=True)
class DirectPredConfig:
    rho: float = 0.3
    epsilon: float = 0.0
    freq: int = 1
    cj_offset: float = 0.0
    zero_center: bool = False

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError("rho must lie in [0, 1)")
        if self.epsilon < 0:
            raise ValidationError("epsilon must be non-negative")
        if int(self.freq) != self.freq or self.freq < 1:
            raise ValidationError("freq must be a positive integer")


@dataclass(frozen=True)
class TrainConfig:
    """Settings of one toy training run.

    ``gamma_a`` defaults to ``1 - lr * beta``.  ``surviving_rtol`` and
    ``surviving_floor`` define a surviving mode: an eigenvalue of ``W W^T``
    above both ``surviving_rtol * max`` and the absolute ``surviving_floor``.
    ``fhat_init`` is ``"first_batch"`` or ``"zero"``.  ``target_init`` is
    ``"online"`` (``W_a = W`` at step 0) or ``"zero"``.
    """

    n1: int
    n2: int
    model: AugmentationModel
    lr: float = 0.01
    batch: int = 128
    steps: int = 20000
    seed: int = 0
    hyper: Hyperparams = field(default_factory=lambda: Hyperparams(beta=0.4))
    predictor_mode: str = "directpred"
    gamma_a: float | None = None
    init_scale: float = 0.5
    symmetric_predictor: bool = False
    fhat_init: str = "first_batch"
    target_init: str = "online"
    record_every: int = 100
    surviving_rtol: float = 1e-3
    surviving_floor: float = 1e-6
    recovery_k: int | None = None
    converge_tol: float = 1e-6
    converge_window: int = 100
    stop_on_converge: bool = False

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValidationError("n1 and n2 must be positive")
        if self.model.dim != self.n1:
            raise DimensionError(f"model dimension {self.model.dim} does not match n1 = {self.n1}")
        if not self.lr > 0:
            raise ValidationError("lr must be positive")
        if self.batch < 1 or self.steps < 1 or self.record_every < 1:
            raise ValidationError("batch, steps and record_every must be positive")
        if self.predictor_mode not in PREDICTOR_MODES:
            raise ValidationError(f"unknown predictor_mode {self.predictor_mode!r}; expected one of {PREDICTOR_MODES}")
        if self.fhat_init not in ("first_batch", "zero"):
            raise ValidationError("fhat_init must be 'first_batch' or 'zero'")
        if self.target_init not in ("online", "zero"):
            raise ValidationError("target_init must be 'online' or 'zero'")
        g = self.ema_gamma
        if not 0.0 <= g <= 1.0:
            raise ValidationError(f"EMA parameter gamma_a = {g} outside [0, 1]")

    @property
    def ema_gamma(self):
        return 1.0 - self.lr * self.hyper.beta if self.gamma_a is None else self.gamma_a


@dataclass
class TrainResult:
    record: TrajectoryRecord
    W: np.ndarray
    Wp: np.ndarray
    Wa: np.ndarray
    F_hat: np.ndarray
    steps_run: int
    converged: bool


def batch_moment(features, zero_center=False):
    f = np.asarray(features, dtype=float)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ValidationError("batch must be a nonempty 2-D array (rows = samples)")
    if zero_center:
        f = f - f.mean(axis=0)
    return f.T @ f / f.shape[0]


def update_F_hat(F_hat, batch_features, rho, zero_center=False):
    """``rho * F_hat + (1 - rho) * E_B[f f^T]``; no mean subtraction unless ``zero_center``."""
    F_hat = linalg.as_matrix(F_hat, "F_hat")
    f = np.asarray(batch_features, dtype=float)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ValidationError("batch must be a nonempty 2-D array (rows = samples)")
    if f.shape[1] != F_hat.shape[0]:
        raise DimensionError(f"feature dimension {f.shape[1]} does not match F_hat {F_hat.shape}")
    return rho * F_hat + (1.0 - rho) * batch_moment(f, zero_center)


def direct_set_predictor(F_hat, cfg):
    """Symmetric PSD predictor sharing the eigenvectors of ``F_hat``.

    With ``cfg.cj_offset == 0`` the eigenvalues are ``sqrt(s_j) + epsilon * max(s)``;
    otherwise ``sqrt(max(s_j - c_j, 0))`` and ``epsilon`` is ignored.
    Eigenvalues in ``[-1e-10, 0)``, or below ``64 eps * max(s)``, are treated as zero.
    """
    eig = linalg.sym_eigen(linalg.symmetric_part(linalg.as_matrix(F_hat, "F_hat")))
    s = eig.eigenvalues
    if s.size and s[-1] < -NEG_EIG_TOL:
        raise ValidationError(f"F_hat has a negative eigenvalue {s[-1]:.6e}")
    s = np.clip(s, 0.0, None)
    # eigenvalues at roundoff level are zero; sqrt would amplify their noise
    if s.size:
        s = np.where(s <= ROUNDOFF_FLOOR * s[0], 0.0, s)
    if cfg.cj_offset == 0.0:
        p = np.sqrt(s) + cfg.epsilon * (s[0] if s.size else 0.0)
    else:
        p = np.sqrt(np.clip(s - cfg.cj_offset, 0.0, None))
    return linalg.symmetric_part(eig.apply(lambda _: p))


def surviving_modes(W, rtol=1e-3, floor=1e-6):
    lam = linalg.sym_eigen(W @ W.T).eigenvalues
    top = lam[0] if lam.size else 0.0
    return int(np.count_nonzero((lam > rtol * top) & (lam > floor)))


def subspace_cosines(W, model, k=None):
    """Principal-angle cosines between the row space of ``W`` and the top-k alignment eigenspace.

    Returns ``(cosines, deficient)``, cosines sorted descending.  When ``W`` has
    rank below ``k`` the missing cosines are reported as 0 and ``deficient`` is True.
    """
    W = linalg.as_matrix(W, "W")
    k = W.shape[0] if k is None else int(k)
    if not 1 <= k <= W.shape[0]:
        raise ValidationError(f"k = {k} must lie in [1, n2 = {W.shape[0]}]")
    target = top_left_eigvecs(model, k)
    gram = linalg.sym_eigen(W.T @ W)
    lam = gram.eigenvalues
    rank = int(np.count_nonzero(lam > 1e-12 * max(lam[0], 0.0))) if lam[0] > 0 else 0
    basis = gram.eigenvectors[:, :rank]
    proj = target.T @ basis
    c2 = linalg.sym_eigen(proj @ proj.T).eigenvalues if rank else np.zeros(k)
    cos = np.sqrt(np.clip(c2, 0.0, 1.0))
    deficient = rank < k
    if deficient:
        cos[rank:] = 0.0
    return cos, deficient


def subspace_recovery(W, model, k=None):
    """Mean principal-angle cosine, in ``[0, 1]``; warns when ``W`` is rank deficient."""
    cos, deficient = subspace_cosines(W, model, k)
    if deficient:
        warnings.warn("W has rank below k; missing principal cosines counted as 0", RuntimeWarning, stacklevel=2)
    return float(np.mean(cos))


def _trace_row(cfg, W, Wp, F_hat, loss, C, t, k):
    lam_f = linalg.sym_eigen(linalg.symmetric_part(F_hat)).eigenvalues
    h = cfg.hyper
    cos, _ = subspace_cosines(W, cfg.model, k)
    balance = W @ W.T - Wp.T @ Wp / h.alpha_p - np.exp(-2.0 * h.eta * t) * C
    return {"loss": float(loss), "min_eig_F": float(lam_f[-1]), "max_eig_F": float(lam_f[0]),
            "surviving_modes": surviving_modes(W, cfg.surviving_rtol, cfg.surviving_floor),
            "subspace_cos": float(np.mean(cos)), "balance_residual": float(np.linalg.norm(balance))}


def train_toy(cfg, dp=None):
    """Run the toy trainer; returns a :class:`TrainResult` with a trace sampled every ``record_every`` steps.

    Each step draws ``cfg.batch`` view pairs and uses both orderings of every pair.
    Weight decay is applied as ``lr * eta`` shrinkage, the target follows
    ``W_a <- gamma_a W_a + (1 - gamma_a) W``, and in ``directpred``/``hybrid``
    modes ``W_p`` is reset from ``F_hat`` every ``dp.freq`` steps.
    """
    dp = DirectPredConfig() if dp is None else dp
    rng = make_rng(cfg.seed)
    h = cfg.hyper
    n1, n2 = cfg.n1, cfg.n2
    W = rng.standard_normal((n2, n1)) * (cfg.init_scale / np.sqrt(n1))
    if cfg.predictor_mode == "identity":
        Wp = np.eye(n2)
    else:
        g = rng.standard_normal((n2, n2)) * (cfg.init_scale / np.sqrt(n2))
        Wp = (g + g.T) / np.sqrt(2.0) if cfg.symmetric_predictor else g
    Wa = W.copy() if cfg.target_init == "online" else np.zeros_like(W)
    gamma = cfg.ema_gamma
    C = W @ W.T - Wp.T @ Wp / h.alpha_p
    F_hat = np.zeros((n2, n2)) if cfg.fhat_init == "zero" else None
    k = cfg.recovery_k
    record = TrajectoryRecord(time_name="step")
    for name in TRACE_COLUMNS:
        record.monitors[name] = []
    lr = cfg.lr
    W_ref = W.copy()
    converged = False
    step = 0
    sampler = ViewSampler(cfg.model)
    for step in range(1, cfg.steps + 1):
        x1, x2 = sampler.draw(rng, cfg.batch)
        xa = np.vstack([x1, x2])
        xb = np.vstack([x2, x1])
        f = xa @ W.T
        target = xb @ Wa.T
        pred = f @ Wp.T
        r = target - pred
        m = xa.shape[0]
        loss = 0.5 * float(np.sum(r * r)) / m
        moment = batch_moment(f, dp.zero_center)
        F_hat = moment if F_hat is None else dp.rho * F_hat + (1.0 - dp.rho) * moment
        grad_W = -(Wp.T @ r.T @ xa) / m
        set_now = cfg.predictor_mode in ("directpred", "hybrid") and (step - 1) % dp.freq == 0
        train_wp = cfg.predictor_mode == "gradient" or (cfg.predictor_mode == "hybrid" and not set_now)
        if train_wp:
            grad_Wp = -(r.T @ f) / m
            Wp = Wp - lr * (h.alpha_p * grad_Wp + h.eta_p * Wp)
        W = W - lr * (grad_W + h.eta_s * W)
        Wa = gamma * Wa + (1.0 - gamma) * W
        if set_now:
            Wp = direct_set_predictor(F_hat, dp)
        norms = (np.linalg.norm(W), np.linalg.norm(Wp), np.linalg.norm(Wa))
        if not all(np.isfinite(norms)) or max(norms) > DIVERGENCE_NORM:
            raise DivergenceError("toy trainer diverged", step=step, t=step * lr)
        done = False
        if step % cfg.converge_window == 0:
            change = np.linalg.norm(W - W_ref) / max(np.linalg.norm(W_ref), 1e-300)
            if change < cfg.converge_tol:
                converged = done = True
            W_ref = W.copy()
        if step % cfg.record_every == 0 or step == cfg.steps or (done and cfg.stop_on_converge):
            record.append(step, _trace_row(cfg, W, Wp, F_hat, loss, C, step * lr, k))
        if done and cfg.stop_on_converge:
            break
    record.meta.update(converged=converged, steps_run=step, gamma_a=gamma, mode=cfg.predictor_mode)
    return TrainResult(record, W, Wp, Wa, F_hat, step, converged)


def mode_predictor_values(result, cfg):
    """``(s_j, p_j)`` for surviving modes: eigenvalues of ``W W^T`` and the predictor's Rayleigh quotients."""
    eig = linalg.sym_eigen(result.W @ result.W.T)
    lam = eig.eigenvalues
    keep = (lam > cfg.surviving_rtol * lam[0]) & (lam > cfg.surviving_floor)
    u = eig.eigenvectors[:, keep]
    wp_sym = linalg.symmetric_part(result.Wp)
    p = np.einsum("ij,ik,kj->j", u, wp_sym, u)
    return lam[keep], p


def converged_predictor_check(result, cfg, tau=1.0, sigma2=None, eta=None):
    """Largest ``|p_j - p_plus|`` over surviving modes of an isotropic run; None when every mode collapsed.

    ``sigma2`` and ``eta`` default to the run's model and shared weight decay.
    """
    if sigma2 is None:
        sigma2 = cfg.model.isotropic_sigma2()
        if sigma2 is None:
            raise ValidationError("converged predictor check needs an isotropic model")
    if eta is None:
        eta = cfg.hyper.eta
    fp = fixed_points(tau, sigma2, eta)
    _, p = mode_predictor_values(result, cfg)
    if p.size == 0 or fp.p_plus is None:
        return None
    return float(np.max(np.abs(p - fp.p_plus)))
