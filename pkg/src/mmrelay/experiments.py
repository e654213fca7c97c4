"""Parameter sweeps driven by ``key=value`` config files, written as CSV.

A config file holds one ``key = value`` per line (``#`` starts a comment).
Keys are either :class:`~mmrelay.config.SystemConfig` fields or the
experiment keys in :data:`EXPERIMENT_KEYS`. Unknown or repeated keys are
rejected.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .channels import parse_seed
from .config import ConfigError, FadingProfile, SystemConfig, coerce_field, db2lin, make_config
from .montecarlo import simulate_chain
from .power import energy_for_budget, equal_allocation, sca_optimize, sum_rate_objective
from .rates import rate_e2e

logger = logging.getLogger(__name__)

COMBOS = (("overlay", "HD"), ("overlay", "FD"), ("conventional", "HD"), ("conventional", "FD"))
COLUMNS = ("experiment", "sweep_value", "scheme", "duplex", "closed_form_rate", "montecarlo_rate",
           "montecarlo_stderr", "extra")

# name -> (axis, default sweep)
EXPERIMENTS = {
    "rate-vs-snr": ("snr_db", list(range(-30, 31, 5))),
    "rate-vs-antennas": ("M", [16, 32, 64, 128, 256, 512]),
    "rate-vs-coherence": ("T_c", list(range(20, 301, 10))),
    "rate-vs-pairs": ("K", list(range(1, 21))),
    "powalloc-vs-budget": ("budget_db", list(range(-10, 61, 5))),
    "sca-convergence": ("budget_db", list(range(-10, 61, 5))),
}
POWER_EXPERIMENTS = ("powalloc-vs-budget", "sca-convergence")
INT_AXES = ("M", "T_c", "K")
# power-allocation sweeps fix the pilots at 10 dB unless the file says otherwise
POWER_DEFAULTS = {"rho_p": 10.0}

EXPERIMENT_KEYS = ("experiment", "sweep", "trials", "seed", "output", "montecarlo", "beta_s", "beta_d", "jobs")


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: experiment name, axis values and run settings."""

    name: str
    axis: str
    values: tuple
    base: SystemConfig
    trials: int = 1000
    seed: int = 0
    output: str = "results.csv"
    montecarlo: bool = False
    beta_s: tuple = (1.0,)
    beta_d: tuple = (1.0,)
    jobs: int = 1

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.name!r}; expected one of {tuple(EXPERIMENTS)}")
        if self.axis != EXPERIMENTS[self.name][0]:
            raise ConfigError("sweep", f"{self.name} sweeps {EXPERIMENTS[self.name][0]}, not {self.axis}")
        if not self.values:
            raise ConfigError("sweep", "sweep value list is empty")
        if list(self.values) != sorted(self.values):
            raise ConfigError("sweep", "sweep values must be sorted ascending")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")
        if self.axis in INT_AXES and min(self.values) < 1:
            raise ConfigError("sweep", f"{self.axis} values must be >= 1")

    def replace(self, **changes) -> "ExperimentSpec":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentSpec(**d)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _parse_number_list(key, text, cast=float):
    try:
        return tuple(cast(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(key, f"expected comma-separated numbers, got {text!r}") from None


def parse_sweep(text: str, axis: str) -> tuple:
    """``start:stop:step`` (inclusive) or a comma list."""
    cast = int if axis in INT_AXES else float
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("sweep", "range form is start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigError("sweep", f"bad range {text!r}") from None
        if not step > 0:
            raise ConfigError("sweep", "step must be > 0")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(max(n, 0))]
        if cast is int:
            if any(v != int(v) for v in values):
                raise ConfigError("sweep", f"{axis} values must be integers")
            return tuple(int(v) for v in values)
        return tuple(round(v, 12) for v in values)
    vals = _parse_number_list("sweep", text, float)
    if cast is int:
        if any(v != int(v) for v in vals):
            raise ConfigError("sweep", f"{axis} values must be integers")
        return tuple(int(v) for v in vals)
    return vals


def _parse_bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def read_pairs(path) -> dict:
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected key=value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in pairs:
                raise ConfigError(key, f"repeated on line {lineno}")
            pairs[key] = value
    return pairs


def build_spec(pairs: dict) -> tuple[SystemConfig, ExperimentSpec]:
    """Resolve a raw key/value map into a config and an experiment spec."""
    exp = {k: v for k, v in pairs.items() if k in EXPERIMENT_KEYS}
    sys_raw = {k: v for k, v in pairs.items() if k not in EXPERIMENT_KEYS}
    for key in sys_raw:
        coerce_field(key, sys_raw[key])  # unknown keys and type errors, named
    name = exp.get("experiment", "rate-vs-snr").strip()
    if name not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment {name!r}; expected one of {tuple(EXPERIMENTS)}")
    defaults = dict(POWER_DEFAULTS) if name in POWER_EXPERIMENTS else {}
    defaults.update(sys_raw)
    cfg = make_config(defaults)
    axis, default_values = EXPERIMENTS[name]
    values = parse_sweep(exp["sweep"], axis) if "sweep" in exp else tuple(default_values)
    try:
        trials = int(exp.get("trials", "1000"), 0)
    except ValueError:
        raise ConfigError("trials", f"expected integer, got {exp['trials']!r}") from None
    try:
        jobs = int(exp.get("jobs", "1"), 0)
    except ValueError:
        raise ConfigError("jobs", f"expected integer, got {exp['jobs']!r}") from None
    try:
        seed = parse_seed(exp.get("seed", "0"))
    except ValueError as err:
        raise ConfigError("seed", str(err)) from None
    spec = ExperimentSpec(
        name=name, axis=axis, values=values, base=cfg, trials=trials, seed=seed,
        output=exp.get("output", f"{name}.csv"),
        montecarlo=_parse_bool("montecarlo", exp["montecarlo"]) if "montecarlo" in exp else False,
        beta_s=_parse_number_list("beta_s", exp.get("beta_s", "1")),
        beta_d=_parse_number_list("beta_d", exp.get("beta_d", "1")),
        jobs=jobs,
    )
    for key in ("beta_s", "beta_d"):
        vals = getattr(spec, key)
        if not vals or any(not v > 0 for v in vals):
            raise ConfigError(key, "large-scale gains must be > 0")
    _fading_for(cfg, spec)  # early length check
    return cfg, spec


def parse_config(path) -> tuple[SystemConfig, ExperimentSpec]:
    """Read a config file; missing keys take the defaults."""
    return build_spec(read_pairs(path))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _fading_for(cfg, spec):
    gains = []
    for key in ("beta_s", "beta_d"):
        vals = getattr(spec, key)
        if len(vals) not in (1, cfg.K):
            raise ConfigError(key, f"needs 1 or K={cfg.K} values, got {len(vals)}")
        gains.append(vals[0] if len(vals) == 1 else np.array(vals))
    return FadingProfile.uniform(cfg, *gains)


def _point_config(spec, value):
    base = spec.base
    if spec.axis == "snr_db":
        rho = float(db2lin(value))
        return base.replace(rho_p=rho, rho_s=rho, rho_d=rho)
    if spec.axis in INT_AXES:
        return base.replace(**{spec.axis: int(value)})
    return base


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not np.isfinite(x):
        raise FloatingPointError(f"non-finite value {x} reached the CSV writer")
    return f"{x:.10g}"


def _extra(**items) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in items.items())


def _rate_rows(spec, value):
    rows = []
    for scheme, duplex in COMBOS:
        cfg = _point_config(spec, value).replace(scheme=scheme, duplex=duplex)
        fading = _fading_for(cfg, spec)
        cf = rate_e2e(cfg, fading)
        mc = se = None
        if spec.montecarlo:
            res = simulate_chain(cfg, fading, trials=spec.trials, seed=spec.seed)
            mc, se = res.empirical_R_system, res.stderr
        rows.append((spec.name, _fmt(value), scheme, duplex, _fmt(cf.R_system), _fmt(mc), _fmt(se),
                     _extra(T_d=cf.frame.T_d, bits_per_interval=cf.total_bits / cfg.L)))
    return rows


def _power_rows(spec, value):
    cfg = spec.base.replace(scheme="overlay", duplex="FD")
    fading = _fading_for(cfg, spec)
    P = float(db2lin(value))
    E_d = energy_for_budget(cfg, P)
    sol = sca_optimize(cfg, fading, E_d, cfg.epsilon)
    equal = sum_rate_objective(equal_allocation(cfg, E_d), cfg, fading) / (cfg.L * cfg.T_c)
    extra = _extra(iterations=sol.iterations, converged=sol.converged, rho_s=sol.rho_star[0],
                   rho_d=sol.rho_star[1], equal_rate=equal)
    return [(spec.name, _fmt(value), "overlay", "FD", _fmt(sol.system_rate), "", "", extra)]


def run_point(spec: ExperimentSpec, value) -> list[tuple]:
    """CSV rows of one sweep value, in fixed scheme/duplex order."""
    if spec.name in POWER_EXPERIMENTS:
        return _power_rows(spec, value)
    return _rate_rows(spec, value)


def _run_point_args(args):
    return run_point(*args)


def header_lines(spec: ExperimentSpec) -> list[str]:
    lines = [f"# mmrelay {__version__}", f"# experiment={spec.name}", f"# sweep.{spec.axis}="
             + ",".join(_fmt(v) for v in spec.values)]
    for key, value in asdict(spec.base).items():
        text = value if isinstance(value, str) else "none" if value is None else _fmt(value)
        lines.append(f"# {key}={text}")
    for key in ("trials", "seed", "montecarlo"):
        lines.append(f"# {key}={_fmt(getattr(spec, key))}")
    for key in ("beta_s", "beta_d"):
        lines.append(f"# {key}=" + ",".join(_fmt(v) for v in getattr(spec, key)))
    return lines


def render_csv(spec: ExperimentSpec, rows) -> str:
    buf = io.StringIO()
    for line in header_lines(spec):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def compute_rows(spec: ExperimentSpec) -> list[tuple]:
    """Every row of the sweep, in sweep order (independent of ``jobs``)."""
    args = [(spec, v) for v in spec.values]
    if spec.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            chunks = list(pool.map(_run_point_args, args))
    else:
        chunks = [run_point(*a) for a in args]
    return [row for chunk in chunks for row in chunk]


def summarize(spec: ExperimentSpec, rows) -> list[str]:
    """Best sweep value per scheme/duplex curve."""
    out = []
    curves = {}
    for row in rows:
        curves.setdefault((row[2], row[3]), []).append((float(row[4]), row[1]))
    for (scheme, duplex), pts in curves.items():
        best = max(pts, key=lambda p: p[0])
        out.append(f"{spec.name} {scheme}/{duplex}: max {best[0]:.4f} bits/s/Hz at {spec.axis}={best[1]}")
    return out


def run_experiment(spec: ExperimentSpec, out=None) -> str:
    """Run the sweep, write the CSV to ``out`` (default ``spec.output``) and return its path."""
    path = spec.output if out is None else out
    rows = compute_rows(spec)
    text = render_csv(spec, rows)
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"output directory {directory} does not exist")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    for line in summarize(spec, rows):
        print(line)
    print(f"wrote {len(rows)} rows to {path}")
    return path
