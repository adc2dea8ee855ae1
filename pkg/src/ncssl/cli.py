"""Command-line front end.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 numerical divergence.
"""
import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import augment, directpred as dpm, io, lowdim, matrix_flow as mf, nce, portrait, scalar_flow as sf, verify
from .config import SCHEMAS, SWEEP_KEYS, parse_grid, read_config_file, render_config, resolve
from .errors import ConfigError, DivergenceError, NcsslError

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _hyper(cfg):
    eta = cfg["eta"]
    eta_p = eta if cfg["eta_p"] is None else cfg["eta_p"]
    eta_s = eta if cfg["eta_s"] is None else cfg["eta_s"]
    return mf.Hyperparams(alpha_p=cfg["alpha_p"], beta=cfg["beta"], eta_p=eta_p, eta_s=eta_s)


def _model(cfg, dim):
    if cfg["model.dim"] is not None and cfg["model.dim"] != dim:
        raise ConfigError("model.dim", f"{cfg['model.dim']} does not match n1 = {dim}")
    seed = cfg["seed"] if cfg["model.seed"] is None else cfg["model.seed"]
    return augment.build_model(cfg["model.kind"], dim, sigma2=cfg["model.sigma2"],
                               scramble_k=cfg["model.scramble_k"], noise_scale=cfg["model.noise_scale"],
                               seed=seed)


def _prepare(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(render_config(cfg), encoding="utf-8", newline="\n")
    return out


def _last_row(record):
    return {k: record.last(k) for k in record.columns} if len(record) else {}


def run_simulate_matrix(cfg):
    out = _prepare(cfg)
    rng = augment.make_rng(cfg["seed"])
    model = _model(cfg, cfg["n1"])
    state = mf.init_state(cfg["n1"], cfg["n2"], rng, scale=cfg["init.scale"],
                          symmetric_predictor=cfg["init.symmetric"], predictor=cfg["init.predictor"])
    variant = mf.Variant(cfg["variant"], symmetrize_predictor=cfg["symmetrize"], fixed_tau=cfg["fixed_tau"],
                         freeze_predictor=cfg["freeze_predictor"])
    rec, _ = mf.integrate(state, model, _hyper(cfg), variant, cfg["dt"], cfg["steps"],
                          record_every=cfg["record_every"], method=cfg["method"])
    io.emit_csv(rec, out / "trajectory.csv")
    summary = _last_row(rec)
    io.write_json(summary, out / "summary.json")
    return summary


def run_simulate_scalar(cfg):
    out = _prepare(cfg)
    h = _hyper(cfg)
    if cfg["system"] == "mode":
        m = sf.ScalarMode(cfg["p0"], cfg["s0"], cfg["tau0"])
        rec = sf.integrate_mode(m, h, cfg["sigma2"], cfg["dt"], cfg["steps"], record_every=cfg["record_every"],
                                fixed_tau=cfg["fixed_tau"], method=cfg["method"])
    else:
        st = lowdim.LowDimState(cfg["w0"], cfg["wp0"], cfg["wa0"], cfg["lambda_s"], cfg["lambda_d"])
        rec = lowdim.integrate_lowdim(st, h.alpha_p, h.beta, cfg["dt"], cfg["steps"], cfg["record_every"],
                                      method=cfg["method"])
    io.emit_csv(rec, out / "trajectory.csv")
    summary = _last_row(rec)
    io.write_json(summary, out / "summary.json")
    return summary


def run_fixed_points(cfg, stdout=None):
    fp = sf.fixed_points(cfg["tau"], cfg["sigma2"], cfg["eta"]).to_dict()
    if stdout is not None:
        stdout.write(io.dumps_json(fp))
    out = _prepare(cfg)
    io.write_json(fp, out / "fixed_points.json")
    return {"p_minus": fp["p_minus"], "p_plus": fp["p_plus"], "regime": fp["regime"]}


def run_phase_portrait(cfg):
    out = _prepare(cfg)
    params = {k: cfg[k] for k in ("tau", "sigma2", "eta", "alpha_p", "beta", "lambda_s", "lambda_d", "w_a", "mode")}
    grid = ((cfg["x.min"], cfg["x.max"], cfg["x.count"]), (cfg["y.min"], cfg["y.max"], cfg["y.count"]))
    pp = portrait.phase_portrait(cfg["system"], params, grid)
    io.write_rows(out / "portrait.csv", ["x", "y", "dx", "dy", "kind"], pp.rows)
    io.write_json({"fixed_points": pp.fixed_points, "loci": pp.loci}, out / "fixed_points.json")
    return {"rows": len(pp.rows), "fixed_points": len(pp.fixed_points)}


def run_train_toy(cfg):
    out = _prepare(cfg)
    model = _model(cfg, cfg["n1"])
    tc = dpm.TrainConfig(cfg["n1"], cfg["n2"], model, lr=cfg["lr"], batch=cfg["batch"], steps=cfg["steps"],
                         seed=cfg["seed"], hyper=_hyper(cfg), predictor_mode=cfg["predictor_mode"],
                         gamma_a=cfg["gamma_a"], init_scale=cfg["init.scale"],
                         symmetric_predictor=cfg["init.symmetric"], fhat_init=cfg["fhat_init"],
                         target_init=cfg["target_init"], record_every=cfg["record_every"],
                         surviving_rtol=cfg["surviving_rtol"], surviving_floor=cfg["surviving_floor"])
    dp = dpm.DirectPredConfig(rho=cfg["dp.rho"], epsilon=cfg["dp.epsilon"], freq=cfg["dp.freq"],
                              cj_offset=cfg["dp.cj_offset"], zero_center=cfg["dp.zero_center"])
    res = dpm.train_toy(tc, dp)
    io.emit_csv(res.record, out / "trace.csv")
    summary = _last_row(res.record)
    summary.update(converged=res.converged, steps_run=res.steps_run)
    io.write_json(summary, out / "summary.json")
    return summary


def run_nce_balance(cfg, stdout=None):
    pt = nce.NcePoint(cfg["r_plus"], cfg["r_minus"], cfg["tau_nce"], cfg["lambda_nce"])
    d = nce.dnce_partials(pt)
    total = nce.balance_sum(pt)
    report = {"d_r_plus": d["d_r_plus"], "d_r_minus": list(d["d_r_minus"]), "balance_sum": total,
              "identity": 1.0 - pt.lambda_nce / pt.tau_nce, "loss": nce.dnce_loss(pt)}
    if stdout is not None:
        stdout.write(io.dumps_json(report))
    out = _prepare(cfg)
    io.write_json(report, out / "nce_balance.json")
    return {"balance_sum": total, "identity": report["identity"]}


def run_verify(cfg, stdout=None):
    report = verify.run_suite(cfg["seed"])
    if stdout is not None:
        for name, c in report["checks"].items():
            tag = "PASS" if c["passed"] else "FAIL"
            stdout.write(f"{tag} {name}: {c['value']:.3e} <= {c['tolerance']:.1e}\n")
    out = _prepare(cfg)
    io.write_json(report, out / "verify.json")
    return report


RUNNERS = {
    "simulate-matrix": run_simulate_matrix,
    "simulate-scalar": run_simulate_scalar,
    "fixed-points": run_fixed_points,
    "phase-portrait": run_phase_portrait,
    "train-toy": run_train_toy,
    "nce-balance": run_nce_balance,
    "verify": run_verify,
}


# ------------------------------------------------------------------- sweep


def _sweep_point(args):
    command, cfg = args
    try:
        summary = RUNNERS[command](cfg)
        return EXIT_OK, summary
    except DivergenceError:
        return EXIT_DIVERGED, {}


def run_sweep(cfg, base, stdout=None):
    """Cartesian grid over ``sweep.params``; point ``i`` writes to ``out/point_iiii``."""
    command = cfg["sweep.command"]
    if command is None:
        raise ConfigError("sweep.command", "a subcommand to sweep is required")
    grid = parse_grid(cfg["sweep.params"])
    schema = SCHEMAS[command]
    names = [k for k, _ in grid]
    resolve(schema, {}, {k: None for k in names})  # reject unknown axes early
    if "out" in names:
        raise ConfigError("out", "cannot be a sweep axis")
    root = Path(cfg["out"])
    root.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, combo in enumerate(itertools.product(*(vals for _, vals in grid))):
        point = dict(base)
        point.update(dict(zip(names, combo)))
        point["out"] = str(root / f"point_{i:04d}")
        jobs.append((command, resolve(schema, {}, point)))
    workers = max(1, int(cfg["workers"]))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    fields = []
    for _, summary in results:
        for k in summary:
            if k not in fields:
                fields.append(k)
    header = ["point", *names, "exit_code", *fields]
    rows = []
    for i, ((_, pcfg), (code, summary)) in enumerate(zip(jobs, results)):
        rows.append([i, *(pcfg[n] for n in names), code, *(summary.get(f, "") for f in fields)])
    io.write_rows(root / "summary.csv", header, rows)
    (root / "config.txt").write_text(render_config(cfg), encoding="utf-8", newline="\n")
    if stdout is not None:
        stdout.write(f"{len(jobs)} points written to {root}\n")
    return max((code for code, _ in results), default=EXIT_OK)


# ------------------------------------------------------------------ parser


def build_parser():
    parser = argparse.ArgumentParser(prog="ncssl", description="Linear non-contrastive SSL dynamics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat 'key = value' config file")
        for key in schema:
            p.add_argument(key.flag, dest=key.name, default=None, help=key.help or None)
    p = sub.add_parser("sweep")
    p.add_argument("--config", default=None, help="config with sweep.* keys and base values for the subcommand")
    p.add_argument("--out", dest="out", default=None)
    p.add_argument("--sweep-command", dest="sweep.command", default=None)
    p.add_argument("--param", action="append", default=[], metavar="KEY=V1,V2",
                   help="sweep axis; repeat for a Cartesian grid")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="base value for every point")
    p.add_argument("--workers", dest="workers", default=None)
    for flag in ("seed", "dt", "steps", "record_every"):
        p.add_argument("--" + flag.replace("_", "-"), dest=flag, default=None)
    return parser


def _overrides(ns, skip=("command", "config", "param", "set")):
    return {k: v for k, v in vars(ns).items() if k not in skip and v is not None}


def _dispatch(ns, stdout):
    file_values = read_config_file(ns.config) if ns.config else {}
    if ns.command != "sweep":
        cfg = resolve(SCHEMAS[ns.command], file_values, _overrides(ns))
        runner = RUNNERS[ns.command]
        if ns.command in ("fixed-points", "nce-balance", "verify"):
            result = runner(cfg, stdout=stdout)
        else:
            result = runner(cfg)
        if ns.command == "verify":
            return EXIT_OK if result["all_passed"] else EXIT_FAILED
        return EXIT_OK
    sweep_names = {k.name for k in SWEEP_KEYS} | {"out"}
    flag_values = _overrides(ns)
    sweep_raw = {k: v for k, v in {**file_values, **flag_values}.items() if k in sweep_names}
    if ns.param:
        axes = ";".join(ns.param)
        sweep_raw["sweep.params"] = ";".join(filter(None, [sweep_raw.get("sweep.params", ""), axes]))
    if "workers" not in sweep_raw and os.environ.get("NCSSL_WORKERS"):
        sweep_raw["workers"] = os.environ["NCSSL_WORKERS"]
    swcfg = resolve(SWEEP_KEYS + [k for k in SCHEMAS["verify"] if k.name == "out"], {}, sweep_raw)
    base = {k: v for k, v in file_values.items() if k not in sweep_names}
    for k, v in flag_values.items():
        if k not in sweep_names:
            base[k] = v
    for item in ns.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        k, v = item.split("=", 1)
        base[k.strip()] = v.strip()
    if swcfg["sweep.command"] is not None:
        resolve(SCHEMAS[swcfg["sweep.command"]], base, {})  # unknown base keys fail before any run
    return run_sweep(swcfg, base, stdout=stdout)


def cli_main(argv=None, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return _dispatch(ns, stdout)
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except DivergenceError as exc:
        stderr.write(f"diverged: {exc}\n")
        return EXIT_DIVERGED
    except (NcsslError, ValueError) as exc:
        stderr.write(f"config error: invalid parameters: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_FAILED


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
