"""Decoupled per-mode dynamics once predictor and correlation eigenspaces align.

Each mode carries the predictor eigenvalue ``p``, the correlation eigenvalue
``s`` and the shared EMA proportionality ``tau``.  All right-hand sides accept
numpy arrays so that many modes or configurations integrate in one pass.
"""
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .integrators import get_stepper
from .record import TrajectoryRecord

S_FLOOR = 1e-12
S_CLIP_TOL = 1e-12
STABILITY_TOL = 1e-10
DOUBLE_ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class ScalarMode:
    p: float
    s: float
    tau: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if self.s < -S_CLIP_TOL:
            raise ValidationError(f"s must be non-negative, got {self.s}")
        if not all(math.isfinite(x) for x in (self.p, self.s, self.tau, self.t)):
            raise ValidationError("mode entries must be finite")


def _rhs(p, s, tau, alpha_p, beta, eta_p, eta_s, sigma2, fixed_tau=False):
    gap = tau - (1.0 + sigma2) * p
    dp = alpha_p * s * gap - eta_p * p
    ds = 2.0 * p * s * gap - 2.0 * eta_s * s
    if fixed_tau:
        dtau = np.zeros_like(np.asarray(tau, dtype=float) + 0.0 * p)
    else:
        safe_s = np.where(s > S_FLOOR, s, 1.0)
        dtau = np.where(s > S_FLOOR, beta * (1.0 - tau) - tau * ds / (2.0 * safe_s), beta * (1.0 - tau))
    return dp, ds, dtau


def mode_rhs(m, h, sigma2, fixed_tau=False):
    """``(dp, ds, dtau)`` for one mode.

    Below ``s = 1e-12`` the EMA equation ``s dtau = beta (1 - tau) s - tau ds / 2``
    is degenerate; there ``dtau = beta (1 - tau)``.
    """
    dp, ds, dtau = _rhs(m.p, m.s, m.tau, h.alpha_p, h.beta, h.eta_p, h.eta_s, sigma2, fixed_tau)
    return float(dp), float(ds), float(dtau)


def simulate_modes(p0, s0, tau0, alpha_p, beta, eta_p, eta_s, sigma2, dt, steps,
                   record_every=1, fixed_tau=False, method="rk4"):
    """Integrate broadcastable arrays of modes; all parameters may be arrays.

    Returns
    -------
    times : ndarray (R,)
    p, s, tau : ndarray (R, ...) sampled every ``record_every`` steps (and at the end)
    clips : int
        Number of samples where ``s`` dipped below ``-1e-12`` and was reset to 0.
    """
    if not dt > 0 or steps < 1 or record_every < 1:
        raise ValidationError("need dt > 0, steps >= 1, record_every >= 1")
    p, s, tau = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p0, s0, tau0)),
                                    np.zeros(np.broadcast(alpha_p, beta, eta_p, eta_s, sigma2).shape))[:3]
    y = (p.astype(float).copy(), s.astype(float).copy(), tau.astype(float).copy())
    stepper = get_stepper(method)

    def rhs(state):
        return _rhs(state[0], state[1], state[2], alpha_p, beta, eta_p, eta_s, sigma2, fixed_tau)

    times, ps, ss, taus = [0.0], [y[0].copy()], [y[1].copy()], [y[2].copy()]
    clips = 0
    for k in range(1, steps + 1):
        y = stepper(rhs, y, dt)
        neg = y[1] < 0.0
        if np.any(neg):
            clips += int(np.count_nonzero(y[1] < -S_CLIP_TOL))
            y = (y[0], np.where(neg, 0.0, y[1]), y[2])
        if k % record_every == 0 or k == steps:
            times.append(k * dt)
            ps.append(y[0].copy())
            ss.append(y[1].copy())
            taus.append(y[2].copy())
    if clips:
        warnings.warn(f"s clipped to 0 at {clips} samples", RuntimeWarning, stacklevel=2)
    return np.asarray(times), np.asarray(ps), np.asarray(ss), np.asarray(taus), clips


def integral_constant(p0, s0, alpha_p):
    """Constant of the exact integral ``s(t) = p(t)^2 / alpha_p + exp(-2 eta t) c``.

    Evaluating the integral at ``t = 0`` fixes ``c = s(0) - p(0)^2 / alpha_p``.
    """
    return s0 - p0**2 / alpha_p


def integral_residual(m, c_j, alpha_p, eta):
    return abs(m.s - m.p**2 / alpha_p - math.exp(-2.0 * eta * m.t) * c_j)


def integrate_mode(m, h, sigma2, dt, steps, record_every=1, fixed_tau=False, method="rk4"):
    """Integrate one mode and record ``p, s, tau`` and the integral residual."""
    times, p, s, tau, clips = simulate_modes(m.p, m.s, m.tau, h.alpha_p, h.beta, h.eta_p, h.eta_s,
                                             sigma2, dt, steps, record_every, fixed_tau, method)
    c = integral_constant(m.p, m.s, h.alpha_p)
    resid = np.abs(s - p**2 / h.alpha_p - np.exp(-2.0 * h.eta_s * times) * c)
    rec = TrajectoryRecord()
    for k, t in enumerate(times):
        rec.append(t + m.t, {"p": p[k], "s": s[k], "tau": tau[k], "integral_residual": resid[k]})
    rec.meta.update(c_j=c, s_clips=clips, integral_guaranteed=not h.split_decay)
    return rec


# ------------------------------------------------------- invariant parabola


def parabola_delta(p, tau, sigma2, eta):
    """``Delta = p (tau - (1 + sigma2) p) - eta`` so that the parabola flow is ``p * Delta``."""
    return p * (tau - (1.0 + sigma2) * p) - eta


def parabola_rhs(p, tau, sigma2, eta):
    """``dp/dt`` on the invariant parabola ``s = p^2 / alpha_p``."""
    return p * parabola_delta(p, tau, sigma2, eta)


def parabola_rhs_derivative(p, tau, sigma2, eta):
    return 2.0 * tau * p - 3.0 * (1.0 + sigma2) * p**2 - eta


def _label(slope, tol=STABILITY_TOL):
    if slope < -tol:
        return "stable"
    if slope > tol:
        return "unstable"
    return "saddle"


@dataclass(frozen=True)
class FixedPointSet:
    p0: float
    p_minus: float | None
    p_plus: float | None
    stability: dict
    regime: str
    marginal: tuple = field(default=())

    def to_dict(self):
        return asdict(self)


def fixed_points(tau, sigma2, eta):
    """Fixed points of the parabola flow at frozen ``tau``.

    Regimes: ``eta_zero`` (origin marginal, non-collapsed root ``tau/(1+sigma2)``),
    ``two_positive_roots``, ``double_root`` and ``collapse_only`` when
    ``eta > tau^2 / (4 (1 + sigma2))``.  Near-zero slopes are labelled
    ``saddle`` and listed in ``marginal``.
    """
    if tau < 0 or sigma2 < 0 or eta < 0:
        raise DomainError("tau, sigma2 and eta must be non-negative")
    c = 1.0 + sigma2
    p_minus = p_plus = None
    if eta == 0.0:
        regime = "eta_zero"
        p_plus = tau / c
    else:
        disc = tau * tau - 4.0 * eta * c
        if abs(disc) <= DOUBLE_ROOT_RTOL * tau * tau:
            regime = "double_root"
            p_minus = p_plus = tau / (2.0 * c)
        elif disc > 0.0:
            regime = "two_positive_roots"
            root = math.sqrt(disc)
            p_plus = (tau + root) / (2.0 * c)
            p_minus = 2.0 * eta / (tau + root)  # cancellation-free form of (tau - root) / (2c)
        else:
            regime = "collapse_only"
    stability, marginal = {}, []
    for name, val in (("p0", 0.0), ("p_minus", p_minus), ("p_plus", p_plus)):
        if val is None:
            continue
        label = _label(parabola_rhs_derivative(val, tau, sigma2, eta))
        stability[name] = label
        if label == "saddle":
            marginal.append(name)
    return FixedPointSet(0.0, p_minus, p_plus, stability, regime, tuple(marginal))


def p_minus_value(tau, sigma2, eta):
    """Boundary of the collapse basin on the parabola; NaN outside the two-root regime."""
    fp = fixed_points(tau, sigma2, eta)
    return math.nan if fp.regime != "two_positive_roots" else fp.p_minus


def pminus_monotonicity_check(taus, etas, sigma2):
    """True iff ``p_minus`` is non-decreasing in ``eta`` and non-increasing in ``tau`` over the grid.

    Grid cells outside the two-root regime are ignored.
    """
    taus = np.sort(np.atleast_1d(np.asarray(taus, dtype=float)))
    etas = np.sort(np.atleast_1d(np.asarray(etas, dtype=float)))
    grid = np.array([[p_minus_value(t, sigma2, e) for e in etas] for t in taus])
    for row in grid:  # along eta
        vals = row[np.isfinite(row)]
        if np.any(np.diff(vals) < 0):
            return False
    for col in grid.T:  # along tau
        vals = col[np.isfinite(col)]
        if np.any(np.diff(vals) > 0):
            return False
    return True


def scalar_K(p, s, tau, h, sigma2):
    """The alignment operator ``K`` restricted to one aligned mode."""
    c = 1.0 + sigma2
    return c * (0.5 * h.alpha_p * s + p * p - (tau / c) * p) + 0.5 * (h.eta_p + 2.0 * h.eta_s)


def pd_condition(p, s, tau, h, sigma2):
    """Mode-wise positive-definiteness condition for ``K``: ``Delta < (alpha_p (1+sigma2) s + eta) / 2``."""
    eta = h.eta
    delta = parabola_delta(p, tau, sigma2, eta)
    bound = 0.5 * (h.alpha_p * (1.0 + sigma2) * s + eta)
    return {"delta": delta, "bound": bound, "satisfied": bool(delta < bound)}


def tau_closed_form(p_series, beta, dt):
    """EMA coefficient from a sampled ``p(t)`` on the invariant parabola, with ``tau(0) = 0``.

    Trapezoidal evaluation of ``beta exp(-beta t) / p(t) * int_0^t p(t') exp(beta t') dt'``,
    accumulated in rescaled form to avoid overflow of ``exp(beta t)``.
    """
    p = np.asarray(p_series, dtype=float)
    if np.any(p <= 0):
        raise DomainError("p must be strictly positive")
    decay = math.exp(-beta * dt)
    acc = np.empty_like(p)
    acc[0] = 0.0
    j = 0.0
    for k in range(1, p.size):
        j = decay * j + 0.5 * dt * (decay * p[k - 1] + p[k])
        acc[k] = j
    return beta * acc / p
