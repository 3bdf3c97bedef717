"""Monte Carlo experiments comparing estimators with their asymptotic predictions.

An experiment simulates ``replicates`` series at one true model, runs a set of
estimators on each, writes the raw replicate table, and reduces it to an
:class:`ExperimentSummary`.  :func:`compare_report` then confronts the
empirical MSE ratios with the quadrature inefficiencies.

Replicate ``i`` draws all its randomness from the Philox substreams
``(master_seed, i, stream)``, so the raw table does not depend on how many
worker processes ran the replicates.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .api import run_method
from .estimators import METHODS, KernelFactory, SearchBox
from .exceptions import CGEMError, ExclusionRateExceeded, MismatchedConfig
from .quadrature import ineff_closed_form, ineff_fraction, psi, psi_small_delta
from .simulation import SimulationSpec, simulate_observations
from .spectral import ModelParams
from .toeplitz import cgem_parts

logger = logging.getLogger(__name__)

THREADS_ENV = "MCGEV_THREADS"
RAW_COLUMNS = (
    "replicate", "seed", "method", "b_hat", "theta_hat", "c_hat", "converged", "boundary_hit",
    "status",
)
PSI_COLUMNS = ("replicate", "seed", "statistic")
MODES = ("estimate", "psi")

# (numerator, denominator, parameter, kind, asymptotic ratio, small-delta limit)
RATIO_SPECS = (
    ("GEV", "ML", "b", "mse", "I1", "ineff"),
    ("GEV", "ML", "theta", "mse", "I2", "ineff"),
    ("GEV", "ML", "c", "mse", "I3", "one"),
    ("GE0", "ML0", "theta", "var", "I0", "one"),
    ("EV", "MLc", "b", "mse", "I4", "ineff"),
    ("H", "GEV", "theta", "mse", None, "one"),
)

# (method, parameter, report field) for n * MSE against 4 pi * entry
VARIANCE_SPECS = (
    ("ML", "b", "sigma1_sq"),
    ("ML", "theta", "sigma2_sq"),
    ("ML", "c", "sigma3_sq"),
    ("GEV", "b", "v1"),
    ("EV", "b", "v1"),
    ("GEV", "theta", "v2"),
    ("GEV", "c", "v3"),
    ("ML0", "theta", "var_theta_ml0"),
    ("GE0", "theta", "var_theta_ge0"),
    ("MLc", "b", "sigma4_sq"),
)


# --------------------------------------------------------------------------
# configuration


def _floats(value):
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    if np.isscalar(value):
        value = [value]
    return tuple(float(v) for v in value)


def _words(value):
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    return tuple(str(v) for v in value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that defines a Monte Carlo experiment.

    ``nu``, ``b0``, ``theta0`` and ``delta`` are sweeps: tuples whose
    Cartesian product gives the cells of the experiment.  ``threads`` and
    ``output_dir`` do not influence results and are left out of
    :meth:`config_hash`.

    Attributes
    ----------
    methods : tuple of str
        Estimator tags among ``EV GEV ML ML0 GE0 MLc H``.
    mode : {"estimate", "psi"}
        ``psi`` records ``y' A (I - A) y / tr A - 1`` at the fixed wrong
        parameters ``(psi_b, psi_theta)`` instead of running estimators.
    ml_start : {"none", "gev"}
        Seed the likelihood search with the GEV estimate of the same replicate.
    """

    nu: tuple = (0.5,)
    b0: tuple = (1.0,)
    theta0: tuple = (1.0,)
    delta: tuple = (0.01,)
    n: int = 2000
    replicates: int = 500
    master_seed: int = 0
    methods: tuple = ("EV", "GEV", "ML")
    mode: str = "estimate"
    psi_b: float = 2.0
    psi_theta: float = 1.0
    box_factor: float = 100.0
    scan_points: int = 64
    grid_points: int = 16
    ml_start: str = "none"
    sim_method: str = "circulant"
    z_threshold: float = 3.0
    max_exclusion: float = 0.10
    threads: int = 0
    output_dir: str = ""

    def __post_init__(self):
        for name in ("nu", "b0", "theta0", "delta"):
            values = _floats(getattr(self, name))
            if not values:
                raise ValueError(f"sweep {name} is empty")
            if not all(math.isfinite(v) and v > 0 for v in values):
                raise ValueError(f"{name} must be positive, got {values}")
            object.__setattr__(self, name, values)
        if min(self.nu) < 0.5:
            raise ValueError("nu must be >= 1/2")
        object.__setattr__(self, "methods", _words(self.methods))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "estimate" and not self.methods:
            raise ValueError("no estimators selected")
        if int(self.replicates) < 2:
            raise ValueError("need at least two replicates")
        if int(self.n) < 2:
            raise ValueError("n must be >= 2")
        if self.ml_start not in ("none", "gev"):
            raise ValueError("ml_start must be 'none' or 'gev'")
        for name in ("psi_b", "psi_theta", "box_factor", "z_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.max_exclusion < 1:
            raise ValueError("max_exclusion must be in [0, 1)")

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string or typed values; unknown keys are an error."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            key = key.strip().lower()
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            default = known[key].default
            if isinstance(default, tuple):
                kwargs[key] = value
            elif isinstance(default, bool):
                kwargs[key] = str(value).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(value)
            elif isinstance(default, float):
                kwargs[key] = float(value)
            else:
                kwargs[key] = str(value)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text):
        """Parse flat ``key = value`` lines; ``#`` starts a comment."""
        parser = configparser.ConfigParser(
            interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
        )
        parser.read_string("[experiment]\n" + text)
        return cls.from_mapping(dict(parser["experiment"]))

    @classmethod
    def from_file(cls, path):
        return cls.from_text(Path(path).read_text())

    def canonical(self):
        d = asdict(self)
        d.pop("threads")
        d.pop("output_dir")
        return d

    def config_hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def cells(self):
        """Single-cell configurations, one per point of the sweep grid."""
        return [
            replace(self, nu=(nu,), b0=(b0,), theta0=(t0,), delta=(d,))
            for nu in self.nu
            for b0 in self.b0
            for t0 in self.theta0
            for d in self.delta
        ]

    @property
    def params0(self):
        if len(self.cells()) != 1:
            raise ValueError("params0 is only defined for a single-cell configuration")
        return ModelParams(self.nu[0], self.b0[0], self.theta0[0], self.delta[0])

    def box(self):
        p = self.params0
        return SearchBox.around(
            p.b, p.theta, self.box_factor, scan_points=self.scan_points, grid_points=self.grid_points
        )

    def tag(self):
        p = self.params0
        return f"nu{p.nu:g}_b{p.b:g}_th{p.theta:g}_d{p.delta:g}_{self.mode}"


def worker_count(requested=0):
    """Worker processes: ``requested`` (or 1) capped by ``MCGEV_THREADS`` when set."""
    n = int(requested) if requested else 0
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        cap = int(env)
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer")
        n = min(n, cap) if n else cap
    return max(n, 1)


# --------------------------------------------------------------------------
# replicates

_KERNELS = {}


def _kernel_factory(nu, delta, n):
    # per-process cache: scan grids repeat across replicates
    key = (nu, delta, n)
    if key not in _KERNELS:
        _KERNELS[key] = KernelFactory(nu, delta, n, cache_size=1024)
    return _KERNELS[key]


def _failed_row(i, seed, method, status):
    return {
        "replicate": i, "seed": seed, "method": method, "b_hat": math.nan, "theta_hat": math.nan,
        "c_hat": math.nan, "converged": False, "boundary_hit": False, "status": status,
    }


def _status(res):
    if res.converged:
        return "ok"
    return "boundary" if res.boundary_hit else "nonconverged"


def _estimate_rows(cfg, i, y):
    p = cfg.params0
    box = cfg.box()
    kf = _kernel_factory(p.nu, p.delta, cfg.n)
    seed = cfg.master_seed
    order = list(cfg.methods)
    if cfg.ml_start == "gev" and "ML" in order and "GEV" in order:
        order.remove("GEV")
        order.insert(0, "GEV")
    results = {}
    for tag in order:
        start = None
        if tag == "ML" and cfg.ml_start == "gev":
            prev = results.get("GEV")
            if isinstance(prev, dict) and prev["converged"]:
                start = (prev["b_hat"], prev["theta_hat"])
        try:
            res = run_method(
                tag, y, p.nu, p.delta, box, b0=p.b, c0=p.c, kernel_factory=kf, seed=seed,
                start=start,
            )
        except CGEMError as exc:
            logger.info("replicate %d: %s failed: %s", i, tag, exc)
            results[tag] = _failed_row(i, seed, tag, f"failed:{type(exc).__name__}")
            continue
        results[tag] = {
            "replicate": i, "seed": seed, "method": tag, "b_hat": res.b_hat,
            "theta_hat": res.theta_hat, "c_hat": res.c_hat, "converged": bool(res.converged),
            "boundary_hit": bool(res.boundary_hit), "status": _status(res),
        }
    return [results[tag] for tag in cfg.methods]


def run_replicate(cfg, i):
    """Rows of the raw table for replicate ``i`` of a single-cell config."""
    p = cfg.params0
    spec = SimulationSpec(p, cfg.n, seed=cfg.master_seed, method=cfg.sim_method, replicate=i)
    y = simulate_observations(spec).y
    if cfg.mode == "psi":
        kernel = _kernel_factory(p.nu, p.delta, cfg.n)(cfg.psi_theta)
        quad, trA = cgem_parts(cfg.psi_b, kernel, y, "levinson")
        return [{"replicate": i, "seed": cfg.master_seed, "statistic": quad / trA - 1.0}]
    return _estimate_rows(cfg, i, y)


def _run_chunk(args):
    cfg, indices = args
    return [run_replicate(cfg, i) for i in indices]


def simulate_table(cfg, workers=1):
    """Raw rows of a single-cell config, in replicate order."""
    reps = list(range(int(cfg.replicates)))
    if workers <= 1:
        blocks = [run_replicate(cfg, i) for i in reps]
    else:
        chunks = [reps[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
        by_rep = {}
        for chunk, rows in zip(chunks, done):
            by_rep.update(zip(chunk, rows))
        blocks = [by_rep[i] for i in reps]
    return [row for block in blocks for row in block]


# --------------------------------------------------------------------------
# raw table I/O


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(rows, columns, config_hash):
    """CSV text with a provenance comment line; floats round-trip exactly."""
    buf = io.StringIO()
    buf.write(f"# cgemev raw table config_hash={config_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def read_table(text):
    """Inverse of :func:`write_table`; returns ``(rows, config_hash)``."""
    lines = text.splitlines()
    config_hash = ""
    if lines and lines[0].startswith("#"):
        config_hash = lines[0].split("config_hash=")[-1].strip()
        lines = lines[1:]
    rows = []
    for rec in csv.DictReader(lines):
        row = {}
        for key, value in rec.items():
            if key in ("replicate", "seed"):
                row[key] = int(value)
            elif key in ("converged", "boundary_hit"):
                row[key] = value == "1"
            elif key in ("method", "status"):
                row[key] = value
            else:
                row[key] = float(value)
        rows.append(row)
    return rows, config_hash


# --------------------------------------------------------------------------
# summaries


@dataclass
class MomentSummary:
    """Sampling moments of one estimator for one parameter."""

    method: str
    parameter: str
    truth: float
    count: int
    mean: float
    bias: float
    variance: float
    mse: float
    se_mean: float
    se_mse: float


@dataclass
class RatioSummary:
    """Paired ratio of MSEs (or variances) of two estimators, with delta-method SE."""

    numerator: str
    denominator: str
    parameter: str
    kind: str
    value: float
    se: float
    count: int
    predicted_key: str | None
    limit_key: str


@dataclass
class ExperimentSummary:
    config_hash: str
    mode: str
    nu: float
    b0: float
    theta0: float
    delta: float
    n: int
    replicates: int
    excluded: dict = field(default_factory=dict)
    moments: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    psi_b: float = math.nan
    psi_theta: float = math.nan
    psi_mean: float = math.nan
    psi_se: float = math.nan

    def exclusion_rates(self):
        return {m: k / self.replicates for m, k in self.excluded.items()}

    def moment(self, method, parameter):
        for m in self.moments:
            if m.method == method and m.parameter == parameter:
                return m
        raise KeyError((method, parameter))

    def ratio(self, numerator, denominator, parameter):
        for r in self.ratios:
            if (r.numerator, r.denominator, r.parameter) == (numerator, denominator, parameter):
                return r
        raise KeyError((numerator, denominator, parameter))

    def to_dict(self):
        return asdict(self)


PARAMETERS = ("b", "theta", "c")


def _usable(row):
    keys = ("b_hat",) if row["method"] == "EV" else ("b_hat", "theta_hat", "c_hat")
    return bool(row["converged"]) and all(math.isfinite(row[k]) for k in keys)


def _moments(method, parameter, x, truth):
    k = x.size
    err = x - truth
    sq = err**2
    sd = x.std(ddof=1) if k > 1 else math.nan
    return MomentSummary(
        method=method,
        parameter=parameter,
        truth=truth,
        count=k,
        mean=float(x.mean()),
        bias=float(err.mean()),
        variance=float(x.var(ddof=1)) if k > 1 else math.nan,
        mse=float(sq.mean()),
        se_mean=float(sd / math.sqrt(k)) if k > 1 else math.nan,
        se_mse=float(sq.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan,
    )


def paired_ratio(loss_num, loss_den):
    """``mean(loss_num) / mean(loss_den)`` and its delta-method standard error."""
    a, b = np.asarray(loss_num, float), np.asarray(loss_den, float)
    k = a.size
    ma, mb = a.mean(), b.mean()
    r = ma / mb
    if k < 2:
        return float(r), math.nan
    cov = np.cov(a, b, ddof=1)
    rel = cov[0, 0] / ma**2 + cov[1, 1] / mb**2 - 2 * cov[0, 1] / (ma * mb)
    return float(r), float(abs(r) * math.sqrt(max(rel, 0.0) / k))


def summarize(rows, cfg):
    """Reduce raw rows of a single-cell config to an :class:`ExperimentSummary`.

    Pure function of the rows, so a summary can be recomputed exactly from a
    persisted table.
    """
    p = cfg.params0
    s = ExperimentSummary(
        config_hash=cfg.config_hash(), mode=cfg.mode, nu=p.nu, b0=p.b, theta0=p.theta,
        delta=p.delta, n=int(cfg.n), replicates=int(cfg.replicates),
    )
    if cfg.mode == "psi":
        x = np.array([r["statistic"] for r in rows if math.isfinite(r["statistic"])])
        s.excluded = {"PSI": len(rows) - x.size}
        s.psi_b, s.psi_theta = cfg.psi_b, cfg.psi_theta
        s.psi_mean = float(x.mean())
        s.psi_se = float(x.std(ddof=1) / math.sqrt(x.size))
        return s
    truth = {"b": p.b, "theta": p.theta, "c": p.c}
    by_method = {m: {} for m in cfg.methods}
    for row in rows:
        by_method[row["method"]][row["replicate"]] = row
    for m in cfg.methods:
        good = {i: r for i, r in by_method[m].items() if _usable(r)}
        s.excluded[m] = len(by_method[m]) - len(good)
        by_method[m] = good
        for par in PARAMETERS:
            if m == "EV" and par != "b":
                continue
            x = np.array([good[i][f"{par}_hat"] for i in sorted(good)])
            if x.size:
                s.moments.append(_moments(m, par, x, truth[par]))
    for num, den, par, kind, pred, limit in RATIO_SPECS:
        if num not in by_method or den not in by_method:
            continue
        common = sorted(set(by_method[num]) & set(by_method[den]))
        if len(common) < 2:
            continue
        xa = np.array([by_method[num][i][f"{par}_hat"] for i in common])
        xb = np.array([by_method[den][i][f"{par}_hat"] for i in common])
        if kind == "mse":
            la, lb = (xa - truth[par]) ** 2, (xb - truth[par]) ** 2
        else:
            la, lb = (xa - xa.mean()) ** 2, (xb - xb.mean()) ** 2
        value, se = paired_ratio(la, lb)
        s.ratios.append(RatioSummary(num, den, par, kind, value, se, len(common), pred, limit))
    return s


# --------------------------------------------------------------------------
# running


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: ExperimentSummary
    raw_path: Path | None = None


def _columns(cfg):
    return PSI_COLUMNS if cfg.mode == "psi" else RAW_COLUMNS


def raw_path(cfg):
    if not cfg.output_dir:
        return None
    return Path(cfg.output_dir) / f"{cfg.tag()}_{cfg.config_hash()}_raw.csv"


def run_experiment(cfg, reuse=False):
    """Simulate, estimate, persist the raw table, then summarize one cell.

    With ``reuse=True`` an existing raw table carrying the same config hash
    is read back instead of recomputed.

    Raises
    ------
    ExclusionRateExceeded
        If more than ``max_exclusion`` of the replicates failed for some
        estimator.  The raw table is written before this check.
    """
    if len(cfg.cells()) != 1:
        raise ValueError("run_experiment takes a single-cell config; use run_sweep")
    path = raw_path(cfg)
    rows = None
    if reuse and path is not None and path.exists():
        rows, stored = read_table(path.read_text())
        if stored != cfg.config_hash():
            rows = None
    if rows is None:
        rows = simulate_table(cfg, worker_count(cfg.threads))
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(write_table(rows, _columns(cfg), cfg.config_hash()))
    summary = summarize(rows, cfg)
    for method, rate in summary.exclusion_rates().items():
        if rate > cfg.max_exclusion:
            raise ExclusionRateExceeded(
                f"{method}: {rate:.1%} of replicates failed (limit {cfg.max_exclusion:.0%})"
            )
    return ExperimentResult(cfg, rows, summary, path)


def run_sweep(cfg, reuse=False):
    return [run_experiment(cell, reuse=reuse) for cell in cfg.cells()]


# --------------------------------------------------------------------------
# comparison with the asymptotic predictions


def format_limit(nu):
    """``ineff(nu)`` as ``"10/9 (1.1111)"`` when rational, else the decimal."""
    value = ineff_closed_form(nu)
    frac = ineff_fraction(nu)
    if frac is None or frac.denominator == 1:
        return f"{value:.5f}" if frac is None else f"{frac.numerator} ({value:.4f})"
    return f"{frac.numerator}/{frac.denominator} ({value:.4f})"


@dataclass
class ComparisonRow:
    quantity: str
    empirical: float
    se: float
    predicted: float
    limit: str
    z: float
    gated: bool
    passed: bool


@dataclass
class ComparisonReport:
    config_hash: str
    nu: float
    b0: float
    theta0: float
    delta: float
    z_threshold: float
    rows: list

    @property
    def passed(self):
        return all(r.passed for r in self.rows if r.gated)

    def row(self, quantity):
        for r in self.rows:
            if r.quantity == quantity:
                return r
        raise KeyError(quantity)

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# cgemev comparison config_hash={self.config_hash}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["quantity", "empirical", "se", "predicted", "limit", "z", "gated", "pass"])
        for r in self.rows:
            writer.writerow([
                r.quantity, _fmt(r.empirical), _fmt(r.se), _fmt(r.predicted), r.limit,
                _fmt(r.z), int(r.gated), int(r.passed),
            ])
        return buf.getvalue()

    def to_text(self):
        head = (
            f"nu={self.nu:g} b0={self.b0:g} theta0={self.theta0:g} delta={self.delta:g} "
            f"(config {self.config_hash}, pass iff |z| < {self.z_threshold:g})"
        )
        lines = [head, f"{'quantity':<26}{'empirical':>12}{'se':>10}{'predicted':>12}{'z':>8}  limit"]
        for r in self.rows:
            flag = ("PASS" if r.passed else "FAIL") if r.gated else "info"
            lines.append(
                f"{r.quantity:<26}{r.empirical:>12.5f}{r.se:>10.5f}{r.predicted:>12.5f}"
                f"{r.z:>8.2f}  {r.limit:<18}{flag}"
            )
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _z(emp, se, pred):
    if not (math.isfinite(se) and se > 0):
        return math.nan
    return (emp - pred) / se


def _check_match(summary, report):
    pairs = [
        ("nu", summary.nu, report.nu), ("b0", summary.b0, report.b0),
        ("theta0", summary.theta0, report.theta0), ("delta", summary.delta, report.delta),
    ]
    bad = [f"{k}: {a} vs {b}" for k, a, b in pairs if not math.isclose(a, b, rel_tol=1e-12)]
    if bad:
        raise MismatchedConfig("summary and asymptotic report differ in " + ", ".join(bad))


def compare_report(summary, report, z_threshold=3.0):
    """Tabulate empirical against predicted quantities.

    Ratios with a quadrature prediction are gated: a row passes iff
    ``|z| < z_threshold`` with ``z = (empirical - predicted) / se``.  Scaled
    variances ``n * MSE`` against ``4 pi`` times their limit are reported for
    information only.  In ``psi`` mode the mean statistic is compared with
    the quadrature ``psi``; ``report`` may then be None.

    Raises
    ------
    MismatchedConfig
        If ``report`` was computed for a different ``(nu, b0, theta0, delta)``.
    """
    rows = []
    if summary.mode == "psi":
        if report is not None:
            _check_match(summary, report)
        pred = psi(summary.delta, summary.psi_b, summary.psi_theta, summary.b0, summary.theta0, summary.nu)
        lim = psi_small_delta(summary.psi_b, summary.psi_theta, summary.b0, summary.theta0, summary.nu)
        z = _z(summary.psi_mean, summary.psi_se, pred)
        rows.append(ComparisonRow(
            "psi", summary.psi_mean, summary.psi_se, pred, f"{lim:.5f}", z, True,
            bool(abs(z) < z_threshold),
        ))
    else:
        _check_match(summary, report)
        limits = {"ineff": format_limit(summary.nu), "one": "1"}
        for r in summary.ratios:
            name = f"{r.numerator}/{r.denominator} {r.kind} {r.parameter}"
            pred = getattr(report, r.predicted_key) if r.predicted_key else math.nan
            z = _z(r.value, r.se, pred)
            gated = r.predicted_key is not None
            rows.append(ComparisonRow(
                name, r.value, r.se, pred, limits[r.limit_key], z, gated,
                bool(gated and abs(z) < z_threshold),
            ))
        for method, par, key in VARIANCE_SPECS:
            try:
                m = summary.moment(method, par)
            except KeyError:
                continue
            pred = 4.0 * math.pi * getattr(report, key)
            emp, se = summary.n * m.mse, summary.n * m.se_mse
            z = _z(emp, se, pred)
            rows.append(ComparisonRow(
                f"n*MSE {method} {par}", emp, se, pred, key, z, False, bool(abs(z) < z_threshold),
            ))
    return ComparisonReport(
        summary.config_hash, summary.nu, summary.b0, summary.theta0, summary.delta,
        z_threshold, rows,
    )


def write_outputs(result, comparison):
    """Summary JSON and comparison CSV/text next to the raw table."""
    if result.raw_path is None:
        return []
    stem = str(result.raw_path)[: -len("_raw.csv")]
    out = {
        "summary": Path(stem + "_summary.json"),
        "report_csv": Path(stem + "_report.csv"),
        "report_txt": Path(stem + "_report.txt"),
    }
    doc = {"config": result.config.canonical(), **result.summary.to_dict()}
    out["summary"].write_text(json.dumps(doc, indent=2, default=float) + "\n")
    out["report_csv"].write_text(comparison.to_csv())
    out["report_txt"].write_text(comparison.to_text() + "\n")
    return list(out.values())
