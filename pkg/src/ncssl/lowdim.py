"""Three-scalar reduction ``(w, w_p, w_a)`` of the linear flow and its planar slices.

Planar systems:

``tied``
    the invariant submanifold ``w = w_p`` (requires ``alpha_p = 1``) in ``(w, w_a)``.
``no_predictor``
    ``w_p`` pinned to 1, in ``(w, w_a)``.
``fixed_target``
    ``w_a`` held constant, in ``(w, w_p)``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ValidationError
from .integrators import get_stepper
from .record import TrajectoryRecord

PLANAR_SYSTEMS = ("tied", "no_predictor", "fixed_target")
EIG_TOL = 1e-10
PROBE_STEP = 1e-4


@dataclass(frozen=True)
class LowDimState:
    w: float
    w_p: float
    w_a: float
    lambda_s: float
    lambda_d: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.w, self.w_p, self.w_a, self.lambda_s, self.lambda_d)):
            raise ValidationError("low-dimensional state must be finite")
        if self.lambda_s <= 0 or self.lambda_d <= 0:
            raise ValidationError("lambda_s and lambda_d must be positive")


def lowdim_rhs(st, alpha_p=1.0, beta=1.0):
    """Return ``(dw_p, dw, dw_a)``."""
    err = st.w_a * st.lambda_d - st.w_p * st.w * st.lambda_s
    return alpha_p * err * st.w, st.w_p * err, beta * (st.w - st.w_a)


def planar_rhs(system, x, y, lambda_s, lambda_d, alpha_p=1.0, beta=1.0, w_a=1.0):
    """Vector field of a planar slice; ``x, y`` may be arrays."""
    if system == "tied":
        w, wa = x, y
        return w * (wa * lambda_d - w * w * lambda_s), beta * (w - wa)
    if system == "no_predictor":
        w, wa = x, y
        return wa * lambda_d - w * lambda_s, beta * (w - wa)
    if system == "fixed_target":
        w, wp = x, y
        err = w_a * lambda_d - wp * w * lambda_s
        return wp * err, alpha_p * err * w
    raise ValidationError(f"unknown planar system {system!r}; expected one of {PLANAR_SYSTEMS}")


def planar_jacobian(system, x, y, lambda_s, lambda_d, alpha_p=1.0, beta=1.0, w_a=1.0):
    if system == "tied":
        w, wa = x, y
        return np.array([[wa * lambda_d - 3.0 * w * w * lambda_s, w * lambda_d], [beta, -beta]])
    if system == "no_predictor":
        return np.array([[-lambda_s, lambda_d], [beta, -beta]])
    if system == "fixed_target":
        w, wp = x, y
        err = w_a * lambda_d - wp * w * lambda_s
        return np.array([[-wp * wp * lambda_s, err - wp * w * lambda_s],
                         [alpha_p * (err - wp * w * lambda_s), -alpha_p * w * w * lambda_s]])
    raise ValidationError(f"unknown planar system {system!r}; expected one of {PLANAR_SYSTEMS}")


def eig2(j):
    """Eigenvalues of a real 2x2 matrix as a complex pair, larger real part first."""
    tr = j[0, 0] + j[1, 1]
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    disc = complex(0.25 * tr * tr - det)
    root = disc**0.5
    a, b = 0.5 * tr + root, 0.5 * tr - root
    return (a, b) if a.real >= b.real else (b, a)


def _null_direction(j):
    # direction spanning the kernel of a rank-one 2x2 matrix
    rows = j if abs(j[0]).sum() >= abs(j[1]).sum() else j[::-1]
    r = rows[0]
    d = np.array([-r[1], r[0]]) if np.any(r) else np.array([1.0, 0.0])
    return d / np.linalg.norm(d)


def classify_planar(j, rhs=None, point=None, tol=EIG_TOL):
    """Label a planar fixed point from its Jacobian.

    When one eigenvalue is numerically zero and the other negative, the
    linearization is inconclusive; if ``rhs`` is given, the nonlinear field is
    sampled a short way along the center direction on both sides.  Outward
    flow on either side labels the point ``unstable``.
    """
    lam = eig2(j)
    re = [z.real for z in lam]
    if all(r < -tol for r in re):
        return "stable", lam
    if all(r > tol for r in re):
        return "unstable", lam
    if max(re) > tol and min(re) < -tol:
        return "saddle", lam
    if rhs is not None and point is not None and max(re) <= tol and min(re) < -tol:
        d = _null_direction(j - lam[0].real * np.eye(2))
        outward = False
        for sign in (1.0, -1.0):
            q = np.asarray(point, dtype=float) + sign * PROBE_STEP * d
            v = np.asarray(rhs(q[0], q[1]))
            if sign * float(v @ d) > 0.0:
                outward = True
        return ("unstable" if outward else "stable"), lam
    return "saddle", lam


def planar_fixed_points(system, lambda_s, lambda_d, alpha_p=1.0, beta=1.0, w_a=1.0):
    """Isolated fixed points of a planar slice with stability labels.

    ``fixed_target`` has a whole hyperbola ``w_p w = w_a lambda_d / lambda_s``
    of fixed points in addition to the origin; only the origin is returned here.
    """
    def rhs(x, y):
        return planar_rhs(system, x, y, lambda_s, lambda_d, alpha_p, beta, w_a)

    points = [(0.0, 0.0, "origin")]
    if system == "tied":
        r = lambda_d / lambda_s
        points.append((r, r, "non_collapsed"))
    elif system == "no_predictor" and math.isclose(lambda_s, lambda_d, rel_tol=0.0, abs_tol=1e-15):
        points = []
    out = []
    for x, y, name in points:
        j = planar_jacobian(system, x, y, lambda_s, lambda_d, alpha_p, beta, w_a)
        label, lam = classify_planar(j, rhs, (x, y))
        out.append({"x": x, "y": y, "name": name, "stability": label,
                    "eigenvalues": [lam[0].real, lam[1].real]})
    return out


def lowdim_nullclines(lambda_s, lambda_d, grid, system="tied", beta=1.0):
    """Sampled nullclines and fixed points of the ``tied`` or ``no_predictor`` planar system.

    Parameters
    ----------
    grid : (lo, hi, count)
        Range of ``w`` at which the curves are sampled.

    Returns
    -------
    dict
        ``nullcline_wa``: points on ``w_a = w``; ``nullcline_w``: points on the
        non-trivial ``dw/dt = 0`` curve (``w_a = w^2 lambda_s / lambda_d`` when
        tied, ``w_a = w lambda_s / lambda_d`` without a predictor);
        ``fixed_points``: list of dicts with ``w``, ``w_a``, ``stability`` and
        Jacobian ``eigenvalues``.
    """
    if system not in ("tied", "no_predictor"):
        raise ValidationError("nullclines are defined for the tied and no_predictor systems")
    lo, hi, count = grid
    if count < 2 or not hi > lo:
        raise ValidationError("grid needs hi > lo and at least two samples")
    w = np.linspace(lo, hi, int(count))
    ratio = lambda_s / lambda_d
    wa_curve = w * w * ratio if system == "tied" else w * ratio
    fps = [{"w": p["x"], "w_a": p["y"], "stability": p["stability"], "eigenvalues": p["eigenvalues"]}
           for p in planar_fixed_points(system, lambda_s, lambda_d, beta=beta)]
    return {"nullcline_wa": np.column_stack([w, w]),
            "nullcline_w": np.column_stack([w, wa_curve]),
            "fixed_points": fps}


def integrate_lowdim(st, alpha_p=1.0, beta=1.0, dt=1e-3, steps=1000, record_every=1, method="rk4"):
    """RK4 trajectory of the full three-scalar system; records ``w, w_p, w_a``."""
    if not dt > 0 or steps < 1 or record_every < 1:
        raise ValidationError("need dt > 0, steps >= 1, record_every >= 1")
    stepper = get_stepper(method)
    lam_s, lam_d = st.lambda_s, st.lambda_d

    def rhs(y):
        wp, w, wa = y
        err = wa * lam_d - wp * w * lam_s
        return alpha_p * err * w, wp * err, beta * (w - wa)

    rec = TrajectoryRecord()
    y = (st.w_p, st.w, st.w_a)
    rec.append(0.0, {"w": y[1], "w_p": y[0], "w_a": y[2]})
    for k in range(1, steps + 1):
        y = stepper(rhs, y, dt)
        if not all(math.isfinite(v) and abs(v) < 1e12 for v in y):
            raise DivergenceError("low-dimensional flow diverged", step=k, t=k * dt)
        if k % record_every == 0 or k == steps:
            rec.append(k * dt, {"w": y[1], "w_p": y[0], "w_a": y[2]})
    return rec
