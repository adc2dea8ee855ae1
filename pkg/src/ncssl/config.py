"""Flat ``key = value`` run configs with typed schemas per subcommand.

Config files hold one assignment per line; ``#`` starts a comment.  Every key
maps to a command-line flag by replacing ``.`` and ``_`` with ``-``, so
``model.kind`` is ``--model-kind``.  Flags override file values.
"""
from dataclasses import dataclass

from .errors import ConfigError

TRUE = {"true", "1", "yes", "on"}
FALSE = {"false", "0", "no", "off"}


@dataclass(frozen=True)
class Key:
    name: str
    kind: str  # float | int | bool | str | optfloat | optint | floatlist | choice
    default: object
    help: str = ""
    choices: tuple = ()

    @property
    def flag(self):
        return "--" + self.name.replace(".", "-").replace("_", "-")


def coerce(key, raw):
    """Typed value of ``raw`` (a string, or an already-typed default) for ``key``."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key.kind == "float":
            return float(text)
        if key.kind == "int":
            return int(text)
        if key.kind == "optfloat":
            return None if text.lower() in ("", "none") else float(text)
        if key.kind == "optint":
            return None if text.lower() in ("", "none") else int(text)
        if key.kind == "floatlist":
            return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(key.name, f"cannot parse {raw!r} as {key.kind}") from None
    if key.kind == "bool":
        if text.lower() in TRUE:
            return True
        if text.lower() in FALSE:
            return False
        raise ConfigError(key.name, f"cannot parse {raw!r} as a boolean")
    if key.kind == "choice":
        if text not in key.choices:
            raise ConfigError(key.name, f"{text!r} is not one of {', '.join(key.choices)}")
        return text
    return text


def format_config_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, list):
        return ",".join(format_config_value(x) for x in v)
    return str(v)


def parse_config_text(text):
    """Raw string values from config text; later assignments win."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line.strip()!r}")
        key, value = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        values[key] = value.strip()
    return values


def read_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror or exc}") from None


def resolve(schema, file_values, overrides):
    """Merge defaults, file values and overrides, rejecting keys outside ``schema``."""
    by_name = {k.name: k for k in schema}
    out = {k.name: k.default for k in schema}
    for source in (file_values, overrides):
        for name, raw in source.items():
            if name not in by_name:
                raise ConfigError(name, "unknown configuration key")
            if raw is None:
                continue
            out[name] = coerce(by_name[name], raw)
    return out


def render_config(values):
    """Resolved config as sorted ``key = value`` lines."""
    return "".join(f"{k} = {format_config_value(values[k])}\n" for k in sorted(values))


# ----------------------------------------------------------------- schemas

_VARIANTS = ("byol", "simsiam", "no_stop_grad", "no_predictor")
_MODEL_KINDS = ("isotropic", "multiplicative", "additive")

COMMON = [Key("seed", "int", 0, "random seed"), Key("out", "str", "ncssl_out", "output directory")]
TIME = [Key("dt", "float", 1e-3, "integration step"), Key("steps", "int", 1000, "number of steps"),
        Key("record_every", "int", 10, "sampling cadence in steps"),
        Key("method", "choice", "rk4", "integrator", ("rk4", "euler"))]
HYPER = [Key("alpha_p", "float", 1.0, "relative predictor rate"), Key("beta", "float", 0.4, "EMA rate"),
         Key("eta", "float", 0.0, "shared weight decay"),
         Key("eta_p", "optfloat", None, "predictor weight decay (defaults to eta)"),
         Key("eta_s", "optfloat", None, "online weight decay (defaults to eta)")]
MODEL = [Key("model.kind", "choice", "isotropic", "augmentation model", _MODEL_KINDS),
         Key("model.sigma2", "float", 0.0, "isotropic augmentation variance"),
         Key("model.scramble_k", "int", 0, "scrambled subspace dimension (multiplicative)"),
         Key("model.noise_scale", "float", 0.0, "additive noise scale"),
         Key("model.dim", "optint", None, "model dimension (must equal n1 when given)"),
         Key("model.seed", "optint", None, "seed of the scrambled subspace (defaults to seed)")]

SCHEMAS = {
    "simulate-matrix": COMMON + TIME + HYPER + MODEL + [
        Key("n1", "int", 8, "input dimension"), Key("n2", "int", 8, "output dimension"),
        Key("variant", "choice", "byol", "flow variant", _VARIANTS),
        Key("symmetrize", "bool", False, "symmetrized predictor flow"),
        Key("fixed_tau", "optfloat", None, "pin the target to fixed_tau * W"),
        Key("freeze_predictor", "bool", False, "hold Wp at its initial value"),
        Key("init.scale", "float", 1.0, "initial weight scale"),
        Key("init.predictor", "choice", "random", "initial predictor", ("random", "identity")),
        Key("init.symmetric", "bool", False, "symmetric random initial predictor"),
    ],
    "simulate-scalar": COMMON + TIME + HYPER + [
        Key("system", "choice", "mode", "scalar system", ("mode", "lowdim")),
        Key("p0", "float", 0.1, "initial predictor eigenvalue"), Key("s0", "float", 0.01, "initial correlation eigenvalue"),
        Key("tau0", "float", 0.0, "initial EMA proportionality"), Key("sigma2", "float", 0.0, "augmentation variance"),
        Key("fixed_tau", "bool", False, "freeze tau"),
        Key("w0", "float", 0.1, "initial w"), Key("wp0", "float", 0.1, "initial w_p"), Key("wa0", "float", 0.0, "initial w_a"),
        Key("lambda_s", "float", 1.0, "single-view eigenvalue"), Key("lambda_d", "float", 0.5, "cross-view eigenvalue"),
    ],
    "fixed-points": COMMON + [
        Key("tau", "float", 1.0, "EMA proportionality"), Key("sigma2", "float", 0.0, "augmentation variance"),
        Key("eta", "float", 0.0, "weight decay"),
    ],
    "phase-portrait": COMMON + [
        Key("system", "choice", "ps_plane", "portrait system", ("ps_plane", "lowdim")),
        Key("mode", "choice", "tied", "low-dimensional slice", ("tied", "no_predictor", "fixed_target")),
        Key("tau", "float", 1.0, "EMA proportionality"), Key("sigma2", "float", 0.0, "augmentation variance"),
        Key("eta", "float", 0.0, "weight decay"), Key("alpha_p", "float", 1.0, "relative predictor rate"),
        Key("beta", "float", 1.0, "EMA rate"), Key("lambda_s", "float", 1.0, "single-view eigenvalue"),
        Key("lambda_d", "float", 0.5, "cross-view eigenvalue"), Key("w_a", "float", 1.0, "fixed target weight"),
        Key("x.min", "float", 0.0, ""), Key("x.max", "float", 2.0, ""), Key("x.count", "int", 21, ""),
        Key("y.min", "float", 0.0, ""), Key("y.max", "float", 2.0, ""), Key("y.count", "int", 21, ""),
    ],
    "train-toy": COMMON + HYPER + MODEL + [
        Key("n1", "int", 8, "input dimension"), Key("n2", "int", 4, "output dimension"),
        Key("lr", "float", 0.01, "learning rate"), Key("batch", "int", 128, "pairs per minibatch"),
        Key("steps", "int", 20000, "minibatches"), Key("record_every", "int", 100, "trace cadence"),
        Key("predictor_mode", "choice", "directpred", "predictor handling",
            ("gradient", "directpred", "hybrid", "identity")),
        Key("gamma_a", "optfloat", None, "EMA parameter (defaults to 1 - lr * beta)"),
        Key("init.scale", "float", 0.5, "initial weight scale"),
        Key("init.symmetric", "bool", False, "symmetric initial predictor"),
        Key("fhat_init", "choice", "first_batch", "F_hat initialization", ("first_batch", "zero")),
        Key("target_init", "choice", "online", "initial target", ("online", "zero")),
        Key("surviving_rtol", "float", 1e-3, "relative survival threshold"),
        Key("surviving_floor", "float", 1e-6, "absolute survival threshold"),
        Key("dp.rho", "float", 0.3, "F_hat moving-average coefficient"),
        Key("dp.epsilon", "float", 0.0, "eigenvalue boost"), Key("dp.freq", "int", 1, "eigendecomposition cadence"),
        Key("dp.cj_offset", "float", 0.0, "eigenvalue offset c_j"),
        Key("dp.zero_center", "bool", False, "subtract the batch mean"),
    ],
    "nce-balance": COMMON + [
        Key("r_plus", "float", 0.0, "positive-pair squared distance"),
        Key("r_minus", "floatlist", [1.0], "comma-separated negative distances"),
        Key("tau_nce", "float", 1.0, "temperature"), Key("lambda_nce", "float", 1.0, "decoupling weight"),
    ],
    "verify": COMMON,
}

SWEEP_KEYS = [Key("sweep.command", "choice", None, "subcommand to sweep",
                  ("simulate-matrix", "simulate-scalar", "fixed-points", "train-toy", "nce-balance")),
              Key("sweep.params", "str", "", "grid, e.g. 'eta=0,0.1;tau=0.5,1'"),
              Key("workers", "int", 1, "worker processes")]


def parse_grid(text):
    """``'a=1,2;b=3'`` into an ordered list of ``(key, [raw values])``."""
    grid = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError("sweep.params", f"expected 'key=v1,v2', got {part!r}")
        key, vals = part.split("=", 1)
        values = [v.strip() for v in vals.split(",") if v.strip()]
        if not values:
            raise ConfigError(key.strip(), "sweep axis has no values")
        grid.append((key.strip(), values))
    return grid
