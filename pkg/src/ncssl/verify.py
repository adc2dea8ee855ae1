"""Fast invariant suite behind the ``verify`` subcommand.

Each check returns ``(value, tolerance)`` and passes when ``value <= tolerance``.
All inputs are seeded, so the report is byte-for-byte reproducible.
"""
import numpy as np

from . import augment, linalg, matrix_flow as mf, nce, scalar_flow as sf
from .directpred import DirectPredConfig, direct_set_predictor


def _eigen_reconstruction(rng):
    a = rng.standard_normal((12, 12))
    s = a + a.T
    eig = linalg.sym_eigen(s)
    orth = np.linalg.norm(eig.eigenvectors.T @ eig.eigenvectors - np.eye(12))
    return max(np.linalg.norm(eig.reconstruct() - s) / np.linalg.norm(s), orth), 1e-12


def _balance_invariant(rng):
    model = augment.isotropic_model(4, 0.1)
    h = mf.Hyperparams.shared_decay(alpha_p=1.0, beta=0.5, eta=0.01)
    rec, _ = mf.integrate(mf.init_state(4, 4, rng), model, h, mf.Variant("byol"), 1e-3, 3000, record_every=100)
    return float(np.max(rec["balance_residual"])), 1e-8


def _no_predictor_decay(rng):
    sigma2, eta = 0.2, 0.05
    model = augment.isotropic_model(4, sigma2)
    h = mf.Hyperparams.shared_decay(eta=eta)
    rec, _ = mf.integrate(mf.init_state(4, 3, rng), model, h, mf.Variant("no_predictor"), 1e-2, 500,
                          record_every=50, monitors=False)
    t, w = rec["t"], rec["w_norm"]
    return float(np.max(np.abs(w / (w[0] * np.exp(-(sigma2 + eta) * t)) - 1.0))), 1e-6


def _integral_of_motion(rng):
    n = 8
    alpha = rng.uniform(0.5, 2.0, n)
    eta = rng.uniform(0.0, 0.1, n)
    s2 = rng.uniform(0.0, 1.0, n)
    p0 = rng.uniform(0.05, 1.0, n)
    s0 = rng.uniform(0.0, 1.0, n)
    tau0 = rng.uniform(0.0, 1.0, n)
    times, p, s, _, _ = sf.simulate_modes(p0, s0, tau0, alpha, 0.5, eta, eta, s2, 1e-3, 10000, record_every=100)
    c = sf.integral_constant(p0, s0, alpha)
    resid = np.abs(s - p**2 / alpha - np.exp(-2.0 * eta * times[:, None]) * c)
    return float(np.max(resid)), 1e-7


def _fixed_point_roots(rng):
    worst = 0.0
    for _ in range(50):
        tau = rng.uniform(0.2, 1.0)
        sigma2 = rng.uniform(0.0, 1.0)
        eta = rng.uniform(0.0, 0.99) * tau * tau / (4.0 * (1.0 + sigma2))
        fp = sf.fixed_points(tau, sigma2, eta)
        for p in (fp.p_minus, fp.p_plus):
            if p is not None:
                worst = max(worst, abs(sf.parabola_rhs(p, tau, sigma2, eta)))
    return worst, 1e-12


def _pd_condition_consistency(rng):
    mismatches = 0
    for _ in range(2000):
        h = mf.Hyperparams.shared_decay(alpha_p=rng.uniform(0.1, 4.0), eta=rng.uniform(0.0, 0.5))
        p, s, tau, s2 = rng.uniform(-1, 2), rng.uniform(0, 2), rng.uniform(0, 1), rng.uniform(0, 1)
        if sf.pd_condition(p, s, tau, h, s2)["satisfied"] != (sf.scalar_K(p, s, tau, h, s2) > 0):
            mismatches += 1
    return float(mismatches), 0.0


def _dnce_balance(rng):
    worst = 0.0
    for _ in range(1000):
        tau = rng.uniform(0.05, 2.0)
        lam = rng.uniform(0.0, 2.0)
        pt = nce.NcePoint(rng.uniform(0, 5), rng.uniform(0, 5, rng.integers(1, 16)), tau, lam)
        worst = max(worst, abs(nce.balance_sum(pt) - (1.0 - lam / tau)))
    return worst, 1e-12


def _directpred_homogeneity(rng):
    a = rng.standard_normal((6, 6))
    f = a @ a.T
    cfg = DirectPredConfig()
    scale = 1.7
    lhs = direct_set_predictor(scale**2 * f, cfg)
    rhs = scale * direct_set_predictor(f, cfg)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)), 1e-10


def _scalar_matrix_equivalence(rng):
    sigma2 = 0.3
    h = mf.Hyperparams.shared_decay(alpha_p=1.0, beta=0.5, eta=0.0)
    w, wp, wa = 0.6, 0.3, 0.2
    st = mf.MatrixState(np.array([[w]]), np.array([[wp]]), np.array([[wa]]))
    rec, _ = mf.integrate(st, augment.isotropic_model(1, sigma2), h, mf.Variant("byol"), 1e-3, 5000, record_every=100)
    _, p, s, tau, _ = sf.simulate_modes(wp, w * w, wa / w, 1.0, 0.5, 0.0, 0.0, sigma2, 1e-3, 5000, record_every=100)
    err = max(np.max(np.abs(rec["w_norm"] ** 2 - s)), np.max(np.abs(rec["eig_Wp_0"] - p)),
              np.max(np.abs(rec["tau_hat"] - tau)))
    return float(err), 1e-6


CHECKS = {
    "eigen_reconstruction": _eigen_reconstruction,
    "balance_invariant": _balance_invariant,
    "no_predictor_decay": _no_predictor_decay,
    "integral_of_motion": _integral_of_motion,
    "fixed_point_roots": _fixed_point_roots,
    "pd_condition_consistency": _pd_condition_consistency,
    "dnce_balance": _dnce_balance,
    "directpred_homogeneity": _directpred_homogeneity,
    "scalar_matrix_equivalence": _scalar_matrix_equivalence,
}


def run_suite(seed=0):
    """``{name: {"value", "tolerance", "passed"}}`` plus an overall ``all_passed`` flag."""
    report = {}
    for k, (name, check) in enumerate(CHECKS.items()):
        value, tol = check(augment.make_rng(seed * 1000 + k))
        report[name] = {"value": float(value), "tolerance": float(tol), "passed": bool(value <= tol)}
    return {"checks": report, "all_passed": all(c["passed"] for c in report.values())}
