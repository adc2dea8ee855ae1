"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""
import io as stdio
import math

import numpy as np
import pytest

from ncssl import augment, linalg, nce
from ncssl import directpred as dp
from ncssl import matrix_flow as mf
from ncssl import scalar_flow as sf
from ncssl.cli import cli_main

from acceptance_log import report
from oracles import parabola_roots


def check(number, passed, detail):
    report(number, bool(passed), detail)
    assert passed, detail


def test_criterion_01_balance_invariant():
    model = augment.isotropic_model(8, 0.03)
    h = mf.Hyperparams.shared_decay(alpha_p=1.0, beta=0.4, eta=0.004)
    st0 = mf.init_state(8, 8, augment.make_rng(0))
    worst = {}
    for dt in (1e-2, 1e-3):
        steps = int(round(20.0 / dt))
        rec, _ = mf.integrate(st0, model, h, mf.Variant("byol"), dt, steps, record_every=steps // 200)
        worst[dt] = float(np.max(rec["balance_residual"]))
    ratio = worst[1e-2] / max(worst[1e-3], 1e-300)
    check(1, worst[1e-3] <= 1e-6 and ratio >= 100,
          f"max residual {worst[1e-3]:.2e} at dt=1e-3 (<= 1e-6), shrink {ratio:.1e}x for dt 1e-2 -> 1e-3 (>= 100)")


def test_criterion_02_no_stop_grad_collapse():
    sigma2, eta = 0.25, 0.1
    model = augment.isotropic_model(4, sigma2)
    h = mf.Hyperparams.shared_decay(eta=eta)
    st0 = mf.init_state(4, 4, augment.make_rng(2))
    rec, _ = mf.integrate(st0, model, h, mf.Variant("no_stop_grad"), 1e-3, 10000, record_every=100)
    lam = np.minimum.accumulate(rec["lambda_min_H"])
    bound_ok = lam[-1] > 0 and mf.decay_bound_check(rec["t"], rec["w_norm"], lam, rtol=1e-6)

    st_i = mf.MatrixState(st0.W, np.eye(4), st0.W.copy())
    rec_i, _ = mf.integrate(st_i, model, h, mf.Variant("no_stop_grad", freeze_predictor=True), 1e-3, 10000,
                            record_every=100)
    lam_i = float(np.min(rec_i["lambda_min_H"]))
    w, t = rec_i["w_norm"], rec_i["t"]
    tight = float(np.max(np.abs(w / (w[0] * np.exp(-0.6 * t)) - 1.0)))
    ok = bound_ok and abs(lam_i - 0.6) <= 1e-12 and tight <= 1e-6 and mf.decay_bound_check(t, w, 0.6)
    check(2, ok, f"random Wp bound holds with running lambda0 {lam[-1]:.3f}; Wp=I lambda0 {lam_i:.12f}, "
                 f"tightness {tight:.1e} (<= 1e-6)")


def test_criterion_03_no_predictor_collapse():
    sigma2, eta = 0.2, 0.05
    model = augment.isotropic_model(5, sigma2)
    rec, _ = mf.integrate(mf.init_state(5, 3, augment.make_rng(3)), model, mf.Hyperparams.shared_decay(eta=eta),
                          mf.Variant("no_predictor"), 1e-3, 20000, record_every=100, monitors=False)
    w, t = rec["w_norm"], rec["t"]
    err = float(np.max(np.abs(w / (w[0] * np.exp(-(sigma2 + eta) * t)) - 1.0)))
    check(3, err <= 1e-6, f"max relative deviation from exp(-(sigma2+eta)t) {err:.1e} over T=20 (<= 1e-6)")


def test_criterion_04_exact_integral():
    rng = np.random.default_rng(4)
    n = 20
    alpha = rng.uniform(0.5, 2.0, n)
    eta = rng.uniform(0.0, 0.1, n)
    sigma2 = rng.uniform(0.0, 1.0, n)
    beta = rng.uniform(0.1, 1.0, n)
    p0 = rng.uniform(0.05, 1.0, n)
    s0 = rng.uniform(0.0, 1.5, n)
    tau0 = rng.uniform(0.0, 1.0, n)
    times, p, s, _, clips = sf.simulate_modes(p0, s0, tau0, alpha, beta, eta, eta, sigma2, 1e-3, 50000,
                                              record_every=100)
    c = sf.integral_constant(p0, s0, alpha)
    resid = np.abs(s - p**2 / alpha - np.exp(-2.0 * eta * times[:, None]) * c)
    worst = float(np.max(resid))
    check(4, worst <= 1e-7 and clips == 0, f"max integral residual {worst:.1e} over 20 configs, T=50 (<= 1e-7)")


def test_criterion_05_fixed_points():
    worst = 0.0
    for sigma2 in (0.0, 0.5):
        for tau in np.linspace(0.2, 2.0, 20):
            thresh = tau**2 / (4 * (1 + sigma2))
            for frac in np.linspace(0.01, 0.99, 20):
                eta = frac * thresh
                fp = sf.fixed_points(tau, sigma2, eta)
                roots = parabola_roots(tau, sigma2, eta)
                assert fp.regime == "two_positive_roots" and len(roots) == 2
                worst = max(worst, abs(fp.p_minus - roots[0]), abs(fp.p_plus - roots[1]))
    fp = sf.fixed_points(1.0, 0.0, 3 / 16)
    exact = max(abs(fp.p_minus - 0.25), abs(fp.p_plus - 0.75))
    boundary = True
    for tau, sigma2 in ((1.0, 0.0), (0.7, 0.3), (1.5, 1.0)):
        ec = tau**2 / (4 * (1 + sigma2))
        boundary &= sf.fixed_points(tau, sigma2, ec * (1 - 1e-10)).regime == "two_positive_roots"
        boundary &= sf.fixed_points(tau, sigma2, ec).regime == "double_root"
        boundary &= sf.fixed_points(tau, sigma2, ec * (1 + 1e-10)).regime == "collapse_only"
    ok = worst <= 1e-10 and exact <= 1e-12 and boundary
    check(5, ok, f"closed form vs bisection {worst:.1e} (<= 1e-10); (1,0,3/16) error {exact:.1e} (<= 1e-12); "
                 f"boundary resolved at 1e-10 offsets: {boundary}")


def _commutator_run(sigma2, eta, tau, wp0, w_scale, seed, T):
    n = 4
    rng = augment.make_rng(seed)
    W = rng.standard_normal((n, n)) * w_scale
    st0 = mf.MatrixState(W, wp0(rng, n), tau * W)
    h = mf.Hyperparams.shared_decay(alpha_p=1.0, eta=eta)
    v = mf.Variant("byol", symmetrize_predictor=True, fixed_tau=tau)
    rec, _ = mf.integrate(st0, augment.isotropic_model(n, sigma2), h, v, 1e-3, int(T / 1e-3), record_every=100)
    return rec


def test_criterion_06_alignment():
    def sym_predictor(rng, n):
        g = rng.standard_normal((n, n))
        return 0.3 * np.eye(n) + 0.2 * (g + g.T) / 2

    rec = _commutator_run(0.1, 0.05, 0.5, sym_predictor, 0.3, 6, 20.0)
    lam0 = float(np.min(rec["lambda_min_K"]))
    comm, t = rec["commutator_norm"], rec["t"]
    decays = lam0 > 0 and bool(np.all(comm <= np.exp(-2 * lam0 * t) * comm[0] * (1 + 1e-6)))

    def near_half(rng, n):
        g = rng.standard_normal((n, n))
        return 0.5 * np.eye(n) + 0.05 * (g + g.T) / 2

    counter = _commutator_run(0.0, 0.0, 1.0, near_half, 0.1, 6, 20.0)
    lam_c = float(np.min(counter["lambda_min_K"]))
    growth = float(np.max(counter["commutator_norm"]) / counter["commutator_norm"][0])
    ok = decays and lam_c < 0 and growth > 1.0
    check(6, ok, f"lambda_min(K) >= {lam0:.3f} > 0 and commutator within exp(-2 lambda0 t) bound: {decays}; "
                 f"counter-config lambda_min(K) {lam_c:.3f} < 0 with commutator growth {growth:.1f}x")


def test_criterion_07_scalar_matrix_equivalence():
    sigma2, alpha_p, beta = 0.2, 1.3, 0.5
    w, wp, wa = 0.7, 0.4, 0.2
    st0 = mf.MatrixState(np.array([[w]]), np.array([[wp]]), np.array([[wa]]))
    h = mf.Hyperparams(alpha_p=alpha_p, beta=beta)
    rec, _ = mf.integrate(st0, augment.isotropic_model(1, sigma2), h, mf.Variant("byol"), 1e-3, 20000,
                          record_every=100)
    _, p, s, tau, _ = sf.simulate_modes(wp, w * w, wa / w, alpha_p, beta, 0.0, 0.0, sigma2, 1e-3, 20000,
                                        record_every=100)
    err = max(float(np.max(np.abs(rec["w_norm"] ** 2 - s))), float(np.max(np.abs(rec["eig_Wp_0"] - p))),
              float(np.max(np.abs(rec["tau_hat"] - tau))))
    check(7, err <= 1e-6, f"max |matrix - scalar| over (s, p, tau) {err:.1e} at T=20 (<= 1e-6)")


def test_criterion_08_fixed_point_manifold():
    models = {"additive": augment.build_model("additive", 6, noise_scale=0.5, seed=0),
              "multiplicative": augment.build_model("multiplicative", 6, scramble_k=3, seed=0)}
    h = mf.Hyperparams.shared_decay(alpha_p=1.0, beta=0.5, eta=0.0)
    rel = {}
    for name, model in models.items():
        st0 = mf.init_state(6, 3, augment.make_rng(1), scale=1.0)
        _, final = mf.integrate(st0, model, h, mf.Variant("byol"), 1e-2, 80000, record_every=80000,
                                monitors=False)
        A = augment.alignment_operator(model)
        rel[name] = float(np.linalg.norm(final.Wp @ final.W - final.W @ A) / np.linalg.norm(final.W))
    m = augment.multiplicative_model(np.eye(6), augment.random_orthonormal(6, 3, augment.make_rng(5)))
    proj_err = float(np.max(np.abs(augment.alignment_operator(m) - m.params["Pc"])))
    ok = all(r <= 1e-5 for r in rel.values()) and proj_err <= 1e-12
    check(8, ok, f"relative manifold residual additive {rel['additive']:.1e}, multiplicative "
                 f"{rel['multiplicative']:.1e} (<= 1e-5); |A - Pc| {proj_err:.1e} (<= 1e-12)")


def _toy(model, seed, **kw):
    base = dict(lr=0.01, batch=64, steps=10000, seed=seed, record_every=10000)
    base.update(kw)
    return dp.TrainConfig(8, 4, model, **base)


@pytest.mark.slow
def test_criterion_09_directpred():
    model = augment.build_model("multiplicative", 8, scramble_k=4, seed=0)
    seeds = (0, 1, 2)
    recov = [dp.subspace_recovery(dp.train_toy(_toy(model, s, hyper=mf.Hyperparams(beta=0.4))).W, model)
             for s in seeds]

    decay = mf.Hyperparams(beta=0.4, eta_p=0.05, eta_s=0.05)
    counts = {}
    for offset in (0.1, -0.05):
        counts[offset] = [int(dp.train_toy(_toy(model, s, hyper=decay, init_scale=0.1),
                                       dp.DirectPredConfig(cj_offset=offset)).record.last("surviving_modes"))
                          for s in seeds]
    fewer = all(a < b for a, b in zip(counts[0.1], counts[-0.05]))

    worst_p = 0.0
    for sigma2, eta in ((0.0, 0.0), (1.0, 0.0), (0.2, 0.01)):
        iso = augment.isotropic_model(8, sigma2)
        for s in seeds:
            cfg = _toy(iso, s, predictor_mode="gradient", batch=256, steps=20000,
                       hyper=mf.Hyperparams(beta=0.4, eta_p=eta, eta_s=eta))
            err = dp.converged_predictor_check(dp.train_toy(cfg), cfg)
            worst_p = max(worst_p, math.inf if err is None else err)
    ok = min(recov) >= 0.95 and fewer and worst_p <= 0.05
    check(9, ok, f"subspace recovery {', '.join(f'{r:.4f}' for r in recov)} (>= 0.95); surviving modes "
                 f"c=+0.1 {counts[0.1]} vs c=-0.05 {counts[-0.05]}; max |p_j - p+| {worst_p:.4f} (<= 0.05)")


def test_criterion_10_dnce_identity():
    rng = np.random.default_rng(10)
    worst_bal = 0.0
    for _ in range(10_000):
        tau, lam = rng.uniform(0.05, 3.0), rng.uniform(0.0, 3.0)
        pt = nce.NcePoint(rng.uniform(0, 10), rng.uniform(0, 10, rng.integers(1, 33)), tau, lam)
        worst_bal = max(worst_bal, abs(nce.balance_sum(pt) - (1.0 - lam / tau)))
    worst_fd = 0.0
    h = 1e-6
    for _ in range(500):
        tau, lam = rng.uniform(0.05, 3.0), rng.uniform(0.0, 3.0)
        x = np.concatenate(([rng.uniform(0, 5)], rng.uniform(0, 5, rng.integers(1, 17))))

        def loss(y):
            return nce.dnce_loss(nce.NcePoint(y[0], y[1:], tau, lam))

        d = nce.dnce_partials(nce.NcePoint(x[0], x[1:], tau, lam))
        grad = np.concatenate(([d["d_r_plus"]], d["d_r_minus"]))
        fd = np.array([(loss(x + e) - loss(x - e)) / (2 * h) for e in np.eye(x.size) * h])
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - grad)) / np.max(np.abs(grad))))
    ok = worst_bal <= 1e-12 and worst_fd <= 1e-7
    check(10, ok, f"max |sum - (1 - lambda/tau)| {worst_bal:.1e} over 1e4 points (<= 1e-12); "
                  f"finite-difference relative error {worst_fd:.1e} (<= 1e-7)")


def _cli(argv):
    out, err = stdio.StringIO(), stdio.StringIO()
    code = cli_main(argv, stdout=out, stderr=err)
    return code, out.getvalue()


def test_criterion_11_determinism(tmp_path):
    a = _cli(["verify", "--out", str(tmp_path / "va")])
    b = _cli(["verify", "--out", str(tmp_path / "vb")])
    same = a == b and a[0] == 0
    same &= (tmp_path / "va" / "verify.json").read_bytes() == (tmp_path / "vb" / "verify.json").read_bytes()
    runs = {
        "simulate-matrix": ["--n1", "4", "--n2", "4", "--steps", "500", "--model-kind", "multiplicative",
                            "--model-scramble-k", "2", "--seed", "7"],
        "simulate-scalar": ["--p0", "0.3", "--s0", "0.2", "--steps", "500", "--eta", "0.01"],
        "train-toy": ["--steps", "200", "--record-every", "20", "--seed", "7"],
        "phase-portrait": ["--eta", "0.1", "--x-count", "5", "--y-count", "5"],
    }
    files = {"simulate-matrix": ["trajectory.csv", "summary.json"], "simulate-scalar": ["trajectory.csv"],
             "train-toy": ["trace.csv", "summary.json"], "phase-portrait": ["portrait.csv", "fixed_points.json"]}
    for cmd, args in runs.items():
        for tag in ("a", "b"):
            assert _cli([cmd, *args, "--out", str(tmp_path / f"{cmd}_{tag}")])[0] == 0
        for f in files[cmd]:
            same &= (tmp_path / f"{cmd}_a" / f).read_bytes() == (tmp_path / f"{cmd}_b" / f).read_bytes()
    check(11, same, "repeated verify and fixed-seed simulate/train/portrait runs are byte-identical")
