"""Direction-field samples with fixed-point and curve overlays for plotting.

Each row is ``(x, y, dx, dy, kind)`` with ``kind`` one of ``field``,
``fp_stable``, ``fp_unstable``, ``fp_saddle``, ``parabola`` or ``nullcline``.
Field vectors are unit length, or exactly zero where the raw magnitude is
below ``1e-14``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import lowdim
from .errors import ValidationError
from .scalar_flow import _rhs, fixed_points

ZERO_FIELD = 1e-14
ROW_KINDS = ("field", "fp_stable", "fp_unstable", "fp_saddle", "parabola", "nullcline")
_FP_KIND = {"stable": "fp_stable", "unstable": "fp_unstable", "saddle": "fp_saddle"}


@dataclass
class PhasePortrait:
    system: str
    params: dict
    rows: list = field(default_factory=list)
    fixed_points: list = field(default_factory=list)

    @property
    def loci(self):
        return sorted({fp["locus"] for fp in self.fixed_points})

    def of_kind(self, kind):
        return [r for r in self.rows if r[4] == kind]


def _axis(axis, name):
    try:
        lo, hi, count = axis
    except (TypeError, ValueError):
        raise ValidationError(f"{name} axis must be (min, max, count)") from None
    count = int(count)
    if count < 1 or hi < lo:
        raise ValidationError(f"{name} axis needs max >= min and count >= 1")
    return np.linspace(float(lo), float(hi), count)


def unit_field(dx, dy):
    mag = np.hypot(dx, dy)
    big = mag >= ZERO_FIELD
    safe = np.where(big, mag, 1.0)
    return np.where(big, dx / safe, 0.0), np.where(big, dy / safe, 0.0)


def _field_rows(xs, ys, fn):
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    dx, dy = fn(gx, gy)
    ux, uy = unit_field(np.asarray(dx, dtype=float), np.asarray(dy, dtype=float))
    return [(float(x), float(y), float(a), float(b), "field")
            for x, y, a, b in zip(gx.ravel(), gy.ravel(), ux.ravel(), uy.ravel())]


def _numeric_jacobian(fn, x, y, h=1e-7):
    j = np.empty((2, 2))
    for col, (ex, ey) in enumerate(((h, 0.0), (0.0, h))):
        fp = np.asarray(fn(x + ex, y + ey), dtype=float)
        fm = np.asarray(fn(x - ex, y - ey), dtype=float)
        j[:, col] = (fp - fm) / (2.0 * h)
    return j


def _ps_plane(params, xs, ys):
    tau = float(params.get("tau", 1.0))
    sigma2 = float(params.get("sigma2", 0.0))
    eta = float(params.get("eta", 0.0))
    alpha_p = float(params.get("alpha_p", 1.0))
    c = 1.0 + sigma2

    def fn(p, s):
        dp, ds, _ = _rhs(p, s, tau, alpha_p, 0.0, eta, eta, sigma2, fixed_tau=True)
        return dp, ds

    rows = _field_rows(xs, ys, fn)
    rows += [(float(p), float(p * p / alpha_p), 0.0, 0.0, "parabola") for p in xs]
    fps = []
    if eta == 0.0:
        # origin is degenerate; a non-collapsed vertical branch and the collapsed s = 0 axis
        fps.append({"x": 0.0, "y": 0.0, "stability": "saddle", "locus": "origin"})
        p_star = tau / c
        for s in ys[ys > 0]:
            fps.append({"x": p_star, "y": float(s), "stability": "stable", "locus": "non_collapsed_branch"})
        for p in xs[xs != 0]:
            growth = 2.0 * p * (tau - c * p)
            label = "stable" if growth < -lowdim.EIG_TOL else "unstable" if growth > lowdim.EIG_TOL else "saddle"
            fps.append({"x": float(p), "y": 0.0, "stability": label, "locus": "collapsed_axis"})
    else:
        fp = fixed_points(tau, sigma2, eta)
        cand = [("origin", 0.0)]
        if fp.p_minus is not None:
            cand.append(("p_minus", fp.p_minus))
        if fp.p_plus is not None and fp.regime != "double_root":
            cand.append(("p_plus", fp.p_plus))
        for name, p in cand:
            s = p * p / alpha_p
            label, _ = lowdim.classify_planar(_numeric_jacobian(fn, p, s))
            fps.append({"x": float(p), "y": float(s), "stability": label, "locus": name})
    return rows, fps


def _lowdim(params, xs, ys):
    system = params.get("mode", "tied")
    lam_s = float(params.get("lambda_s", 1.0))
    lam_d = float(params.get("lambda_d", 0.5))
    alpha_p = float(params.get("alpha_p", 1.0))
    beta = float(params.get("beta", 1.0))
    w_a = float(params.get("w_a", 1.0))
    if system not in lowdim.PLANAR_SYSTEMS:
        raise ValidationError(f"unknown low-dimensional mode {system!r}")

    def fn(x, y):
        return lowdim.planar_rhs(system, x, y, lam_s, lam_d, alpha_p, beta, w_a)

    rows = _field_rows(xs, ys, fn)
    fps = []
    if system in ("tied", "no_predictor"):
        ratio = lam_s / lam_d
        rows += [(float(w), float(w), 0.0, 0.0, "nullcline") for w in xs]
        curve = xs * xs * ratio if system == "tied" else xs * ratio
        rows += [(float(w), float(v), 0.0, 0.0, "nullcline") for w, v in zip(xs, curve)]
    else:
        target = w_a * lam_d / lam_s
        for w in xs[xs != 0]:
            fps.append({"x": float(w), "y": float(target / w), "stability": "stable", "locus": "hyperbola"})
    for p in lowdim.planar_fixed_points(system, lam_s, lam_d, alpha_p, beta, w_a):
        fps.append({"x": p["x"], "y": p["y"], "stability": p["stability"], "locus": p["name"]})
    return rows, fps


def phase_portrait(system, params, grid):
    """Sample a planar direction field.

    Parameters
    ----------
    system : {"ps_plane", "lowdim"}
        ``ps_plane`` is the ``(p, s)`` flow of one mode at frozen ``tau`` with
        params ``tau, sigma2, eta, alpha_p``.  ``lowdim`` selects a planar
        slice of the three-scalar system through ``params["mode"]``.
    params : dict
    grid : ((xmin, xmax, nx), (ymin, ymax, ny))
    """
    if len(grid) != 2:
        raise ValidationError("grid must give an x axis and a y axis")
    xs = _axis(grid[0], "x")
    ys = _axis(grid[1], "y")
    if system == "ps_plane":
        rows, fps = _ps_plane(params, xs, ys)
    elif system == "lowdim":
        rows, fps = _lowdim(params, xs, ys)
    else:
        raise ValidationError(f"unknown portrait system {system!r}")
    rows += [(fp["x"], fp["y"], 0.0, 0.0, _FP_KIND[fp["stability"]]) for fp in fps]
    return PhasePortrait(system, dict(params), rows, fps)
