"""Experiment runners: configuration, CSV/JSON outputs and run manifests.

Every experiment writes its data files plus ``manifest.json`` into the output
directory. Data files depend only on the configuration (wall-clock timings
live in the manifest), so a rerun with the same config is byte-identical.
"""
from __future__ import annotations

import ast
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
from scipy.stats import gaussian_kde, norm

from . import __version__
from .abc import ABCConfig, BudgetExhausted, PriorSpec, abc_rejection
from .bo import AcquisitionConfig, approx_posterior, bolfi_run, default_beta
from .discrepancy import delta_theta
from .parallel import ordered_map
from .simulators import OBSERVED_SEED, GaussianSimulator, RngSeed, SimulatorSpec, observed_data

SCHEMA_LINE = "# schema=lfi-kit/v1"
EXPERIMENTS = ("curve", "dist", "abc", "bolfi", "budget")
DEFAULT_N = {"curve": 10_000, "dist": 50, "abc": 10_000, "bolfi": 50, "budget": 50}
DEFAULT_GRID = {"curve": (-1.0, 7.0, 0.25), "dist": (-2.0, 2.0, 0.5)}
BETA_SCHEDULES = {"gp-ucb": default_beta}
SNAPSHOT_STEPS = (1, 2, 4, 8, 10, 20)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int = 0
    out: str = "."
    n: int | None = None
    bounds: tuple = ((-10.0, 10.0),)
    n_folds: int = 5
    lam: float | None = None
    observed_seed: int = OBSERVED_SEED
    theta_grid: tuple | None = None  # (start, stop, step)
    reps: int = 200
    N: int = 50
    epsilon: float = 0.55
    max_proposals: int = 20_000
    K_max: int = 20
    beta: str = "gp-ucb"
    grid_size: int = 512
    eval_grid_size: int = 401
    initial_design: int = 2
    snapshot_steps: tuple = SNAPSHOT_STEPS

    @property
    def sample_size(self) -> int:
        return DEFAULT_N[self.experiment] if self.n is None else self.n

    @property
    def grid(self) -> np.ndarray:
        start, stop, step = self.theta_grid or DEFAULT_GRID[self.experiment]
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return np.round(start + step * np.arange(count), 12)

    def validate(self) -> "RunConfig":
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(("experiment", f"must be one of {EXPERIMENTS}"))
        if not 0 <= self.seed < 2**64:
            problems.append(("seed", "must be a 64-bit unsigned integer"))
        if self.n is not None and self.n < 2:
            problems.append(("n", "must be at least 2"))
        try:
            SimulatorSpec(len(self.bounds), self.bounds, max(self.n or 2, 2))
        except (ValueError, TypeError) as exc:
            problems.append(("bounds", str(exc)))
        if self.n_folds < 2:
            problems.append(("n_folds", "must be at least 2"))
        elif self.experiment in DEFAULT_N and self.sample_size < self.n_folds:
            problems.append(("n_folds", "exceeds the sample size"))
        if self.lam is not None and self.lam < 0:
            problems.append(("lam", "must be nonnegative"))
        if self.theta_grid is not None:
            if len(self.theta_grid) != 3 or not self.theta_grid[2] > 0 \
                    or self.theta_grid[1] < self.theta_grid[0]:
                problems.append(("theta_grid", "expected (start, stop, step) with step > 0"))
        if self.reps < 2:
            problems.append(("reps", "must be at least 2"))
        if self.N < 1:
            problems.append(("N", "must be at least 1"))
        if not 0.0 <= self.epsilon <= 1.0:
            problems.append(("epsilon", "must lie in [0, 1]"))
        if self.max_proposals < self.N:
            problems.append(("max_proposals", "must be at least N"))
        if self.beta not in BETA_SCHEDULES:
            problems.append(("beta", f"unknown schedule; choose from {sorted(BETA_SCHEDULES)}"))
        if self.grid_size < 100:
            problems.append(("grid_size", "must be at least 100"))
        if self.initial_design < 1:
            problems.append(("initial_design", "must be at least 1"))
        if self.K_max < self.initial_design:
            problems.append(("K_max", "must be at least initial_design"))
        if problems:
            raise ConfigError("; ".join(f"{k}: {msg}" for k, msg in problems), problems)
        return self

    def echo(self) -> Dict[str, Any]:
        d = asdict(self)
        d.pop("out")
        return d


_FIELD_NAMES = {f.name for f in fields(RunConfig)}
_TUPLE_FIELDS = {"bounds", "theta_grid", "snapshot_steps"}


def _coerce(key: str, value: Any) -> Any:
    if key in _TUPLE_FIELDS and value is not None:
        return tuple(tuple(v) if isinstance(v, (list, tuple)) else v for v in value)
    return value


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, tuple]:
    """Parse ``key = value`` lines into ``{key: (value, line_number)}``.

    Values are Python literals (numbers, strings, lists, ``None``); bare
    words are read as strings. ``#`` starts a comment line.
    """
    entries: Dict[str, tuple] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in _FIELD_NAMES or key == "out":
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = (_coerce(key, _parse_value(raw)), lineno)
    return entries


def build_config(
    experiment: str,
    seed: int,
    out: str,
    config_path: str | None = None,
    overrides: Sequence[str] = (),
) -> RunConfig:
    """File values, then ``key=value`` overrides, then the mandatory seed/out flags."""
    entries: Dict[str, tuple] = {}
    source = config_path or "<defaults>"
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        entries = parse_config_text(text, config_path)
    for item in overrides:
        parsed = parse_config_text(item, "--set")
        entries.update({k: (v, None) for k, (v, _) in parsed.items()})
    if "experiment" in entries and entries["experiment"][0] != experiment:
        raise ConfigError(
            f"{source}:{entries['experiment'][1]}: config is for experiment "
            f"{entries['experiment'][0]!r}, not {experiment!r}"
        )
    values = {k: v for k, (v, _) in entries.items() if k not in ("experiment", "seed")}
    try:
        cfg = RunConfig(experiment=experiment, seed=seed, out=out, **values)
        return cfg.validate()
    except ConfigError as exc:
        problems = exc.args[1] if len(exc.args) > 1 else []
        lines = []
        for key, msg in problems:
            where = entries.get(key, (None, None))[1]
            origin = f"{source}:{where}" if where else ("--set" if key in entries else "default")
            lines.append(f"{origin}: {key}: {msg}")
        raise ConfigError("\n".join(lines) or str(exc)) from None
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


# ---------------------------------------------------------------- outputs


def fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path) -> tuple[List[str], List[List[str]]]:
    """Inverse of :func:`write_csv`: (header, rows as strings)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != SCHEMA_LINE:
        raise ValueError(f"{path}: missing schema line")
    rows = list(csv.reader(text[1:]))
    return rows[0], rows[1:]


def read_csv_columns(path) -> Dict[str, np.ndarray]:
    header, rows = read_csv(path)
    cols: Dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw)
    return cols


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunResult:
    config: RunConfig
    files: List[Path] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    seeds: Dict[str, str] = field(default_factory=dict)
    status: str = "ok"
    summary: Dict[str, Any] = field(default_factory=dict)

    def write_manifest(self) -> Path:
        out = Path(self.config.out)
        manifest = {
            "artifact": "lfikit",
            "version": __version__,
            "experiment": self.config.experiment,
            "status": self.status,
            "config": self.config.echo(),
            "seeds": self.seeds,
            "timings_s": self.timings,
            "outputs": {p.name: sha256(p) for p in self.files},
            "summary": self.summary,
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


class _Stage:
    def __init__(self, result: RunResult, name: str):
        self.result, self.name = result, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.result.timings[self.name] = round(time.perf_counter() - self.t0, 6)


def _observed(cfg: RunConfig, result: RunResult):
    result.seeds["observed"] = f"RngSeed({cfg.observed_seed}, 0)"
    return observed_data(cfg.sample_size, RngSeed(cfg.observed_seed))


def bayes_accuracy(theta: float, theta_true: float = 0.0) -> float:
    """Best achievable accuracy between N(theta_true, 1) and N(theta, 1)."""
    return float(norm.cdf(abs(theta - theta_true) / 2.0))


# ------------------------------------------------------------ experiments


def run_curve(cfg: RunConfig) -> RunResult:
    """Discriminability of observed vs simulated data across a theta grid."""
    result = RunResult(cfg)
    out = Path(cfg.out)
    sim = GaussianSimulator()
    root = RngSeed(cfg.seed)
    result.seeds["theta[i]"] = "RngSeed(seed).child('curve', i) -> child('sim') / child('folds')"
    with _Stage(result, "simulate+classify"):
        obs = _observed(cfg, result)
        grid = cfg.grid

        def one(i):
            return delta_theta(grid[i], sim, obs, cfg.sample_size, cfg.n_folds,
                               root.child("curve", i), cfg.lam).value

        values = ordered_map(one, range(len(grid)))
    path = out / "discriminability_curve.csv"
    write_csv(path, ["theta", "discriminability", "oracle"],
              [(t, v, bayes_accuracy(t)) for t, v in zip(grid, values)])
    result.files.append(path)
    return result


def delta_draws(cfg: RunConfig, obs, theta: float, index: int) -> np.ndarray:
    sim = GaussianSimulator()
    base = RngSeed(cfg.seed).child("dist", index)
    return np.array([
        delta_theta(theta, sim, obs, cfg.sample_size, cfg.n_folds, base.child(r), cfg.lam).value
        for r in range(cfg.reps)
    ])


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def run_dist(cfg: RunConfig) -> RunResult:
    """Quantile bands of repeated discrepancy draws at each grid theta."""
    result = RunResult(cfg)
    out = Path(cfg.out)
    result.seeds["theta[i], rep r"] = "RngSeed(seed).child('dist', i).child(r)"
    with _Stage(result, "simulate+classify"):
        obs = _observed(cfg, result)
        grid = cfg.grid
        draws = ordered_map(lambda i: delta_draws(cfg, obs, grid[i], i), range(len(grid)))
    rows = []
    for t, d in zip(grid, draws):
        qs = np.quantile(d, QUANTILES)
        rows.append((t, d.mean(), d.std(ddof=1), *qs))
    path = out / "delta_distribution.csv"
    write_csv(path, ["theta", "mean", "sd", "q05", "q25", "q50", "q75", "q95"], rows)
    result.files.append(path)
    return result


def median_inversions(thetas, medians) -> int:
    """Adjacent decreases of the median when rows are ordered by |theta|.

    Rows sharing the same |theta| are ordered by their median, so only
    genuine drops between distances count.
    """
    thetas, medians = np.asarray(thetas, float), np.asarray(medians, float)
    order = np.lexsort((medians, np.abs(thetas)))
    return int(np.sum(np.diff(medians[order]) < 0))


def _abc_config(cfg: RunConfig) -> ABCConfig:
    return ABCConfig(cfg.N, cfg.epsilon, cfg.max_proposals, cfg.sample_size, cfg.n_folds,
                     cfg.seed, cfg.lam)


def _write_abc(out: Path, samples, dim: int) -> Path:
    rows = [(r.index, *r.theta, r.delta, r.seed.seed, r.seed.stream_id)
            for r in samples.accepted_records]
    header = ["proposal", *[f"theta_{j + 1}" for j in range(dim)], "delta", "seed", "stream_id"]
    path = out / "abc_samples.csv"
    write_csv(path, header, rows)
    return path


def run_abc(cfg: RunConfig) -> RunResult:
    result = RunResult(cfg)
    out = Path(cfg.out)
    result.seeds["proposal i"] = "draw: RngSeed(seed).child('proposal', i); " \
                                 "discrepancy: RngSeed(seed).child('eval', i)"
    prior = PriorSpec(cfg.bounds)
    with _Stage(result, "rejection-abc"):
        obs = _observed(cfg, result)
        try:
            samples = abc_rejection(prior, _abc_config(cfg), GaussianSimulator(), obs)
        except BudgetExhausted as exc:
            samples = exc.partial
            result.status = "budget_exhausted"
    result.files.append(_write_abc(out, samples, prior.dim))
    diag = out / "abc_diagnostics.csv"
    write_csv(diag, ["status", "required", "accepted", "proposals_used", "acceptance_rate",
                     "epsilon"],
              [(result.status, cfg.N, len(samples.accepted), samples.proposals_used,
                samples.acceptance_rate, cfg.epsilon)])
    result.files.append(diag)
    result.summary = {"accepted": len(samples.accepted), "proposals_used": samples.proposals_used,
                      "acceptance_rate": samples.acceptance_rate}
    return result


def _acq_config(cfg: RunConfig) -> AcquisitionConfig:
    return AcquisitionConfig(beta=BETA_SCHEDULES[cfg.beta], candidate_grid_size=cfg.grid_size,
                             initial_design_size=cfg.initial_design)


def _bolfi(cfg: RunConfig, result: RunResult, obs):
    result.seeds["design"] = "RngSeed(seed).child('design')"
    result.seeds["evaluation k"] = "RngSeed(seed).child('eval', k)"
    result.seeds["candidates for step k"] = "RngSeed(seed).child('acquire', k)"
    return bolfi_run(GaussianSimulator(), obs, cfg.bounds, cfg.K_max, _acq_config(cfg),
                     cfg.seed, cfg.n_folds, cfg.eval_grid_size, cfg.lam)


def _posterior(cfg: RunConfig, trace):
    return approx_posterior(trace.model, PriorSpec(cfg.bounds), trace.grid)


def run_bolfi(cfg: RunConfig) -> RunResult:
    result = RunResult(cfg)
    out = Path(cfg.out)
    with _Stage(result, "acquisition-loop"):
        obs = _observed(cfg, result)
        trace = _bolfi(cfg, result, obs)
        post = _posterior(cfg, trace)
    d = trace.grid.shape[1]
    tcols = [f"theta_{j + 1}" for j in range(d)]
    acq = out / "bolfi_acquisitions.csv"
    write_csv(acq, ["k", *tcols, "delta", "signal_variance",
                    *[f"lengthscale_{j + 1}" for j in range(d)], "noise_variance",
                    *[f"incumbent_{j + 1}" for j in range(d)]],
              [(s.k, *s.theta, s.delta, s.hyper.signal_variance, *s.hyper.lengthscale,
                s.hyper.noise_variance, *s.incumbent) for s in trace.steps])
    result.files.append(acq)
    for k in cfg.snapshot_steps:
        if 1 <= k <= cfg.K_max:
            s = trace.step(k)
            p = out / f"bolfi_step_{k:02d}.csv"
            write_csv(p, [*tcols, "mean", "variance"],
                      [(*g, m, v) for g, m, v in zip(trace.grid, s.mean, s.variance)])
            result.files.append(p)
    pp = out / "bolfi_posterior.csv"
    write_csv(pp, [*tcols, "density", "normalized"],
              [(*g, u, w) for g, u, w in zip(post.grid, post.unnormalized_density,
                                             post.normalized)])
    result.files.append(pp)
    result.summary = {
        "incumbent": [float(v) for v in trace.incumbent],
        "posterior_mode": [float(v) for v in post.mode],
        "epsilon_model": post.epsilon_model,
        "simulator_calls": len(trace.steps),
    }
    return result


def sample_mode(samples: np.ndarray, bounds) -> float:
    """Mode of a 1-D sample via a Gaussian KDE evaluated on a fine grid."""
    lo, hi = bounds[0]
    xs = np.linspace(lo, hi, 2001)
    x = samples[:, 0]
    if len(x) < 2 or np.ptp(x) == 0:
        return float(x[0])
    return float(xs[int(np.argmax(gaussian_kde(x)(xs)))])


def run_budget(cfg: RunConfig) -> RunResult:
    """Simulation counts of rejection ABC versus the acquisition loop on the same problem."""
    result = RunResult(cfg)
    out = Path(cfg.out)
    obs = _observed(cfg, result)
    with _Stage(result, "acquisition-loop"):
        trace = _bolfi(cfg, result, obs)
        post = _posterior(cfg, trace)
    result.seeds["abc proposal i"] = "RngSeed(seed).child('proposal'|'eval', i)"
    with _Stage(result, "rejection-abc"):
        status = "ok"
        try:
            samples = abc_rejection(PriorSpec(cfg.bounds), _abc_config(cfg),
                                    GaussianSimulator(), obs)
        except BudgetExhausted as exc:
            samples, status = exc.partial, "budget_exhausted"
    bo_mode = float(post.mode[0])
    abc_mode = sample_mode(samples.accepted, cfg.bounds) if len(samples.accepted) else math.nan
    bo_calls = len(trace.steps)
    rows = [
        ("bolfi", bo_calls, bo_mode, abs(bo_mode) <= 0.5, "ok"),
        ("rejection_abc", samples.proposals_used, abc_mode, abs(abc_mode) <= 0.5, status),
    ]
    path = out / "budget_report.csv"
    write_csv(path, ["method", "simulations", "posterior_mode", "mode_within_0.5", "status"],
              rows)
    result.files.append(path)
    ratio = samples.proposals_used / bo_calls
    result.summary = {"simulation_ratio_abc_over_bolfi": ratio, "bolfi_mode": bo_mode,
                      "abc_mode": abc_mode, "abc_status": status}
    result.status = status
    return result


RUNNERS = {"curve": run_curve, "dist": run_dist, "abc": run_abc, "bolfi": run_bolfi,
           "budget": run_budget}


def run_experiment(cfg: RunConfig) -> RunResult:
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    result = RUNNERS[cfg.experiment](cfg)
    result.write_manifest()
    return result


def replay_manifest(manifest_path, out: str) -> RunResult:
    """Re-run the experiment recorded in a manifest into ``out``."""
    data = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    conf = {k: _coerce(k, v) for k, v in data["config"].items()}
    cfg = RunConfig(out=out, **conf).validate()
    return run_experiment(cfg)
