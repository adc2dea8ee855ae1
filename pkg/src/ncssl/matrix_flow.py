"""Matrix gradient flow of the two-layer linear BYOL/SimSiam model.

The online network ``W`` (n2 x n1), predictor ``Wp`` (n2 x n2) and target
``Wa`` (n2 x n1) evolve under the large-batch gradient flow of the
stop-gradient regression loss plus EMA.  Monitors track the balancing
invariant, the no-stop-gradient collapse operator and predictor/correlation
eigenspace alignment along a trajectory.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .errors import (
    DimensionError,
    DivergenceError,
    NonUniqueFixedPointError,
    UnsupportedVariantError,
    ValidationError,
)
from .integrators import get_stepper
from .record import TrajectoryRecord

VARIANTS = ("byol", "simsiam", "no_stop_grad", "no_predictor")
DIVERGENCE_NORM = 1e12
TINY = 1e-15


@dataclass(frozen=True)
class Hyperparams:
    """Relative rates of the flow.

    ``beta`` is the EMA rate (discrete EMA parameter ``1 - lr * beta``),
    ``eta_p``/``eta_s`` are predictor and online weight decays.
    """

    alpha_p: float = 1.0
    beta: float = 0.0
    eta_p: float = 0.0
    eta_s: float = 0.0

    def __post_init__(self):
        if not self.alpha_p > 0:
            raise ValidationError("alpha_p must be positive")
        for name in ("beta", "eta_p", "eta_s"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    @classmethod
    def shared_decay(cls, alpha_p=1.0, beta=0.0, eta=0.0):
        return cls(alpha_p=alpha_p, beta=beta, eta_p=eta, eta_s=eta)

    @property
    def eta(self):
        return self.eta_s

    @property
    def split_decay(self):
        return self.eta_p != self.eta_s


@dataclass(frozen=True)
class Variant:
    """Which ablation of the flow to run.

    ``fixed_tau`` replaces the EMA target by ``Wa = fixed_tau * W`` (the
    proportional-EMA surrogate with a time-independent coefficient).
    ``freeze_predictor`` holds ``Wp`` at its initial value.
    """

    kind: str = "byol"
    symmetrize_predictor: bool = False
    fixed_tau: float | None = None
    freeze_predictor: bool = False

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValidationError(f"unknown variant {self.kind!r}; expected one of {VARIANTS}")

    @property
    def tied_target(self):
        """True when ``Wa`` is a fixed function of ``W`` rather than its own state."""
        return self.kind != "byol" or self.fixed_tau is not None

    def target_coefficient(self):
        if self.kind == "byol":
            return self.fixed_tau
        return 1.0


@dataclass(frozen=True)
class MatrixState:
    W: np.ndarray
    Wp: np.ndarray
    Wa: np.ndarray
    t: float = 0.0

    @property
    def n1(self):
        return self.W.shape[1]

    @property
    def n2(self):
        return self.W.shape[0]


def init_state(n1, n2, rng, scale=1.0, symmetric_predictor=False, predictor="random"):
    """Gaussian ``W`` with entry scale ``scale / sqrt(n1)``, ``Wa = 0``.

    ``predictor`` is ``"random"`` (entry scale ``scale / sqrt(n2)``) or
    ``"identity"``.
    """
    W = rng.standard_normal((n2, n1)) * (scale / np.sqrt(n1))
    if predictor == "identity":
        Wp = np.eye(n2)
    else:
        g = rng.standard_normal((n2, n2)) * (scale / np.sqrt(n2))
        Wp = (g + g.T) / np.sqrt(2.0) if symmetric_predictor else g
    return MatrixState(W, Wp, np.zeros_like(W))


def _check_state(state, model):
    W, Wp, Wa = state.W, state.Wp, state.Wa
    if W.shape[1] != model.dim:
        raise DimensionError(f"W has {W.shape[1]} columns but the model has dimension {model.dim}")
    if Wp.shape != (W.shape[0], W.shape[0]) or Wa.shape != W.shape:
        raise DimensionError(f"inconsistent shapes W{W.shape} Wp{Wp.shape} Wa{Wa.shape}")
    for name, m in (("W", W), ("Wp", Wp), ("Wa", Wa)):
        if not np.all(np.isfinite(m)):
            raise ValidationError(f"{name} has non-finite entries")


def _rhs(W, Wp, Wa, model, h, v):
    sigma_s, sigma_d = model.sigma_s, model.sigma_d
    coeff = v.target_coefficient()
    target = Wa if coeff is None else coeff * W
    if v.kind == "no_predictor":
        dW = (target @ sigma_d - W @ sigma_s) - h.eta_s * W
        dWp = np.zeros_like(Wp)
    else:
        resid = target @ sigma_d - Wp @ W @ sigma_s
        dWp = h.alpha_p * resid @ W.T - h.eta_p * Wp
        if v.kind == "no_stop_grad":
            eye = np.eye(Wp.shape[0])
            wt = Wp - eye
            dW = -(Wp.T @ Wp + eye) @ W @ model.x_aug - wt.T @ wt @ W @ sigma_d - h.eta_s * W
        else:
            dW = Wp.T @ resid - h.eta_s * W
        if v.symmetrize_predictor:
            dWp = linalg.symmetric_part(dWp)
        if v.freeze_predictor:
            dWp = np.zeros_like(Wp)
    if coeff is None:
        dWa = h.beta * (W - Wa)
    else:
        dWa = np.zeros_like(Wa)
    return dW, dWp, dWa


def flow_rhs(state, model, h, v):
    """Time derivatives ``(dW, dWp, dWa)`` of the selected variant.

    Variants with a tied target (SimSiam, no stop-gradient, no predictor, or a
    fixed ``tau``) report ``dWa = 0``; their target is recomputed from ``W``.
    """
    _check_state(state, model)
    return _rhs(state.W, state.Wp, state.Wa, model, h, v)


def tie_target(state, v):
    coeff = v.target_coefficient()
    Wp = np.eye(state.n2) if v.kind == "no_predictor" else state.Wp
    Wa = state.Wa if coeff is None else coeff * state.W
    return replace(state, Wp=Wp, Wa=Wa)


# ---------------------------------------------------------------- monitors


def initial_constant(W0, Wp0, alpha_p):
    """``C = W(0) W(0)^T - Wp(0)^T Wp(0) / alpha_p``."""
    return W0 @ W0.T - (Wp0.T @ Wp0) / alpha_p


def balance_residual(W, Wp, C, alpha_p, eta, t):
    """``||W W^T - Wp^T Wp / alpha_p - exp(-2 eta t) C||_F``.

    Zero along byol and simsiam flows when predictor and online decays are equal.
    """
    return float(np.linalg.norm(W @ W.T - (Wp.T @ Wp) / alpha_p - np.exp(-2.0 * eta * t) * C))


def nostop_H(state, model, eta):
    """Collapse operator of the no-stop-gradient flow and its minimal eigenvalue.

    ``d vec(W)/dt = -H vec(W)`` with ``vec`` stacking columns.
    """
    Wp = state.Wp
    n2 = Wp.shape[0]
    eye = np.eye(n2)
    wt = Wp - eye
    H = (np.kron(model.x_aug, Wp.T @ Wp + eye)
         + np.kron(model.sigma_d, wt.T @ wt)
         + eta * np.eye(n2 * model.dim))
    return H, linalg.min_eigenvalue(linalg.symmetric_part(H))


def ema_proportionality(state):
    """Least-squares ``tau_hat`` with ``Wa ~ tau_hat * W`` and the normalized correlation."""
    W, Wa = state.W, state.Wa
    inner = float(np.sum(W * Wa))
    nw = float(np.linalg.norm(W))
    na = float(np.linalg.norm(Wa))
    corr = 0.0 if nw < TINY or na < TINY else inner / (nw * na)
    tau_hat = 0.0 if nw < TINY else inner / nw**2
    return {"tau_hat": tau_hat, "corr": corr}


def correlation_matrix(state, model):
    """``F = W X W^T`` with ``X = sigma_d``."""
    return state.W @ model.sigma_d @ state.W.T


def k_matrix(F, Wp, tau, sigma2, h):
    """Operator whose positivity drives ``[F, Wp]`` to zero in the symmetrized isotropic flow."""
    n = F.shape[0]
    c = 1.0 + sigma2
    decay = 0.5 * (h.eta_p + 2.0 * h.eta_s)
    K = c * (0.5 * h.alpha_p * F + Wp @ Wp - (tau / c) * Wp) + decay * np.eye(n)
    return linalg.symmetric_part(K)


def alignment_monitor(state, model, h, tau_hat):
    """Commutator norm, ``lambda_min(K)`` and per-eigenvector alignment cosines.

    Cosine ``j`` is ``|u_j^T Wp u_j| / ||Wp u_j||`` for eigenvector ``u_j`` of ``F``.
    Only defined for isotropic models.
    """
    sigma2 = model.isotropic_sigma2()
    if sigma2 is None:
        raise UnsupportedVariantError("alignment monitor requires an isotropic model")
    F = correlation_matrix(state, model)
    Wp = state.Wp
    comm = float(np.linalg.norm(F @ Wp - Wp @ F))
    lam_k = linalg.min_eigenvalue(k_matrix(F, Wp, tau_hat, sigma2, h))
    u = linalg.sym_eigen(linalg.symmetric_part(F)).eigenvectors
    wu = Wp @ u
    num = np.abs(np.sum(u * wu, axis=0))
    den = np.linalg.norm(wu, axis=0)
    cosines = np.where(den > TINY, num / np.maximum(den, TINY), 0.0)
    return {"commutator_norm": comm, "lambda_min_K": lam_k, "cosines": cosines}


def decay_bound_check(times, norms, lambda0, rtol=1e-6):
    """True iff ``norms[i] <= exp(-lambda0_i t_i) norms[0] (1 + rtol)`` at every sample.

    ``lambda0`` is a scalar or the running minimum of ``lambda_min(H)`` per sample.
    """
    t = np.asarray(times, dtype=float)
    w = np.asarray(norms, dtype=float)
    lam = np.broadcast_to(np.asarray(lambda0, dtype=float), t.shape)
    bound = np.exp(-lam * (t - t[0])) * w[0] * (1.0 + rtol)
    return bool(np.all(w <= bound))


def predictor_fixed_point(F, tau, alpha_p, eta, sigma2=0.0):
    """Fixed point of the predictor flow at frozen ``F`` under proportional EMA.

    ``Wp* = U diag(tau s_j / ((1 + sigma2) s_j + eta / alpha_p)) U^T``.
    Raises if ``eta == 0`` and ``F`` is singular, where the fixed point is not unique.
    """
    eig = linalg.sym_eigen(F)
    s = eig.eigenvalues
    denom = (1.0 + sigma2) * s + eta / alpha_p
    scale = max(1.0, float(np.max(np.abs(s))))
    if np.any(denom <= 1e-14 * scale):
        raise NonUniqueFixedPointError("eta = 0 with singular F: predictor fixed point is not unique")
    return eig.apply(lambda lam: tau * lam / ((1.0 + sigma2) * lam + eta / alpha_p))


def symmetrized_predictor_rhs(Wp, F, tau, alpha_p, eta, sigma2=0.0):
    """Symmetrized isotropic predictor flow at frozen ``F``."""
    return (-0.5 * alpha_p * (1.0 + sigma2) * linalg.anticommutator(Wp, F)
            + alpha_p * tau * F - eta * Wp)


def monitor_values(state, model, h, v, C):
    """Monitor row recorded at one trajectory sample."""
    W, Wp = state.W, state.Wp
    out = {
        "w_norm": float(np.linalg.norm(W)),
        "wp_norm": float(np.linalg.norm(Wp)),
        "balance_residual": balance_residual(W, Wp, C, h.alpha_p, h.eta_s, state.t),
    }
    ema = ema_proportionality(state)
    coeff = v.target_coefficient()
    tau_hat = ema["tau_hat"] if coeff is None else coeff
    out["tau_hat"] = tau_hat
    out["ema_corr"] = ema["corr"] if coeff is None else 1.0
    F = correlation_matrix(state, model)
    out["commutator_norm"] = float(np.linalg.norm(F @ Wp - Wp @ F))
    out["asymmetry"] = float(np.linalg.norm(Wp - Wp.T))
    if model.isotropic_sigma2() is not None:
        al = alignment_monitor(state, model, h, tau_hat)
        out["lambda_min_K"] = al["lambda_min_K"]
        for j, c in enumerate(al["cosines"]):
            out[f"cos_{j}"] = float(c)
    if v.kind == "no_stop_grad":
        out["lambda_min_H"] = nostop_H(state, model, h.eta_s)[1]
    for j, s in enumerate(linalg.sym_eigen(linalg.symmetric_part(F)).eigenvalues):
        out[f"eig_F_{j}"] = float(s)
    for j, p in enumerate(linalg.sym_eigen(linalg.symmetric_part(Wp)).eigenvalues):
        out[f"eig_Wp_{j}"] = float(p)
    return out


def integrate(state0, model, h, v, dt, steps, record_every=1, method="rk4", monitors=True):
    """Advance the flow with fixed steps and record monitors.

    Samples are taken at step 0, every ``record_every`` steps and at the final
    step.  Raises :class:`DivergenceError` once any weight norm exceeds 1e12 or
    turns non-finite.

    Returns
    -------
    (TrajectoryRecord, MatrixState)
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if steps < 1 or record_every < 1:
        raise ValidationError("steps and record_every must be at least 1")
    _check_state(state0, model)
    stepper = get_stepper(method)
    state = tie_target(state0, v)
    C = initial_constant(state.W, state.Wp, h.alpha_p)
    record = TrajectoryRecord()
    record.meta["balance_invariant_guaranteed"] = (
        not h.split_decay and v.kind in ("byol", "simsiam") and not v.symmetrize_predictor
        and not v.freeze_predictor)

    def rhs(y):
        return _rhs(y[0], y[1], y[2], model, h, v)

    def sample(st):
        if monitors:
            record.append(st.t, monitor_values(st, model, h, v, C))
        else:
            record.append(st.t, {"w_norm": float(np.linalg.norm(st.W))})

    sample(state)
    y = (state.W, state.Wp, state.Wa)
    t0 = state.t
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            y = stepper(rhs, y, dt)
        state = tie_target(MatrixState(y[0], y[1], y[2], t0 + k * dt), v)
        y = (state.W, state.Wp, state.Wa)
        norms = [float(np.linalg.norm(m)) for m in y]
        if not all(np.isfinite(norms)) or max(norms) > DIVERGENCE_NORM:
            raise DivergenceError("matrix flow diverged", step=k, t=state.t)
        if k % record_every == 0 or k == steps:
            sample(state)
    return record, state
