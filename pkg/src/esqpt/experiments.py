"""Declarative experiments: variance sweeps, finite-size scalings, quench maps
and cutoff convergence, with deterministic CSV / JSON / gnuplot output."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dynamics import (
    DynamicsError,
    QuenchSpec,
    TimeGrid,
    diagonal_ensemble_average,
    expectation,
    long_time_average,
    microcanonical_state,
    quench_initial_state,
    variance_protocol,
)
from .model import (
    ModelParams,
    build_hamiltonian,
    jx_operator,
    number_operator,
    parity_operator,
    quadrature_operator,
)
from .precision import Precision
from .signop import build_c, gauge_fix_doublet
from .spectral import SpectralError, convergence_check, eigenspace_window, levels_below, lowest_levels, solve

log = logging.getLogger(__name__)

KINDS = ("variance_sweep", "scaling", "quench_map", "convergence")
FAMILIES = ("rabi", "dicke")
EPS = {Precision.DOUBLE: Precision.DOUBLE.eps, Precision.QUAD: Precision.QUAD.eps}


class ConfigError(ValueError):
    pass


class NumericFailure(RuntimeError):
    pass


def _tuple(x, cast=float):
    if x is None:
        return None
    if isinstance(x, (list, tuple)):
        return tuple(cast(v) for v in x)
    return (cast(x),)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.  ``sizes`` are omega0/omega for the Rabi family and N for Dicke."""

    kind: str
    family: str
    sizes: tuple = ()
    name: str = ""
    lambda_ratio: float = 3.0
    n_max: tuple | None = None  # one cutoff per size; None selects the phase-space rule
    reduced_energy_max: float = 0.5  # highest reduced energy the cutoff rule must resolve
    precision: str = "double"
    # variance sweep
    energy_range: tuple = (-10.0, 0.5)
    window_width: int = 10
    window_stride: int = 10
    time_step: float = 100.0
    time_count: int = 100
    # scaling
    targets: tuple = ()
    eigenspaces: int = 5
    # quench map
    lambda_i_ratio: float = 1.5
    lambda_f_ratio: float = 3.0
    p_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    phi_steps: int = 8  # phi = 2 pi k / phi_steps
    total_time: float = 1e6
    samples: int = 1000
    entropy: bool = True
    doublet_tol: float = 1e-6  # ground doublet gap limit, reduced units
    # convergence
    schedule: tuple = ()
    tracked_levels: int = 20
    tracked_below: float | None = None
    rtol: float = 1e-8
    # plumbing
    output_dir: str = "results"
    cache: bool = True
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        s = object.__setattr__
        s(self, "sizes", _tuple(self.sizes) or ())
        s(self, "n_max", _tuple(self.n_max, int))
        s(self, "energy_range", _tuple(self.energy_range))
        s(self, "targets", _tuple(self.targets) or ())
        s(self, "p_grid", _tuple(self.p_grid) or ())
        s(self, "schedule", _tuple(self.schedule, int) or ())
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.kind in KINDS, f"kind must be one of {KINDS}, got {self.kind!r}")
        need(self.family in FAMILIES, f"family must be one of {FAMILIES}, got {self.family!r}")
        try:
            Precision.parse(self.precision)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        need(len(self.sizes) > 0, "sizes must be non-empty")
        for v in self.sizes:
            need(v > 0, "sizes must be positive")
            if self.family == "dicke":
                need(float(v).is_integer() and v >= 1, "Dicke sizes are atom numbers")
        need(self.lambda_ratio >= 0, "lambda_ratio must be non-negative")
        if self.n_max is not None:
            need(len(self.n_max) == len(self.sizes), "n_max needs one cutoff per size")
            for n in self.n_max:
                need(n >= 1 and (n + 1) % 2 == 0, f"cutoff {n} must be odd (even boson dimension)")
        need(len(self.energy_range) == 2 and self.energy_range[0] < self.energy_range[1], "bad energy_range")
        need(self.window_width >= 1 and self.window_stride >= 1, "window width and stride must be >= 1")
        need(self.time_step > 0 and self.time_count >= 1, "time grid needs step > 0 and count >= 1")
        need(self.eigenspaces >= 1, "eigenspaces must be >= 1")
        need(self.phi_steps >= 1 and self.samples >= 1 and self.total_time > 0, "bad quench time grid")
        need(all(0 <= p <= 1 for p in self.p_grid), "p values must lie in [0, 1]")
        need(self.workers >= 1, "workers must be >= 1")
        if self.kind == "scaling":
            need(len(self.targets) > 0, "scaling needs energy targets")
        if self.kind == "quench_map":
            need(len(self.sizes) == 1, "quench map runs at a single size")
            need(len(self.p_grid) > 0, "p_grid must be non-empty")
            need(Precision.parse(self.precision) is Precision.DOUBLE, "quench maps run in the double tier only")
            need(self.lambda_i_ratio > 1, "initial coupling must be superradiant for a ground doublet")
        if self.kind == "convergence":
            need(len(self.schedule) >= 2, "convergence needs a schedule of >= 2 cutoffs")
            need(all(b > a for a, b in zip(self.schedule, self.schedule[1:])), "schedule must increase")
            need(all((n + 1) % 2 == 0 for n in self.schedule), "schedule cutoffs must be odd")
            need(self.rtol > 0, "rtol must be positive")

    # -- serialization --

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for req in ("kind", "family"):
            if req not in data:
                raise ConfigError(f"missing required key {req!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"unparseable config: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_yaml(text)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def content_hash(self) -> str:
        """Hash of everything that affects numbers (plumbing fields excluded)."""
        d = self.to_dict()
        for k in ("output_dir", "cache", "cache_dir", "workers", "name"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    # -- model construction --

    def params(self, size: float, lambda_ratio: float | None = None, n_max: int | None = None) -> ModelParams:
        ratio = self.lambda_ratio if lambda_ratio is None else lambda_ratio
        if n_max is None:
            n_max = self.cutoff(size, ratio)
        if self.family == "rabi":
            return ModelParams.rabi(size, ratio, n_max, self.precision)
        return ModelParams.dicke(int(size), ratio, n_max, self.precision)

    def cutoff(self, size: float, lambda_ratio: float | None = None) -> int:
        if self.n_max is not None:
            return self.n_max[self.sizes.index(size)]
        ratio = self.lambda_ratio if lambda_ratio is None else lambda_ratio
        return cutoff_rule(self.family, size, ratio, self.reduced_energy_max)


def cutoff_rule(family: str, size: float, lambda_ratio: float, reduced_energy: float) -> int:
    """Fock cutoff resolving every state up to ``reduced_energy``.

    Bounds the boson number reachable at energy E from
    ``omega n <= E + omega0 j + 2 g j sqrt(n)`` (g the coupling prefactor),
    then pads by six standard deviations of a coherent state and rounds up to
    an odd cutoff so the boson dimension is even.
    """
    if family == "rabi":
        omega, omega0, n_atoms = 1.0, float(size), 1
    else:
        omega, omega0, n_atoms = 1.0, 1.0, int(size)
    j = n_atoms / 2
    lam = lambda_ratio * math.sqrt(omega * omega0) / 2
    g = 2 * lam / math.sqrt(n_atoms)
    a = g * j / omega
    energy = reduced_energy * omega0 * j
    root = a + math.sqrt(max(a * a + (energy + omega0 * j) / omega, 0.0))
    n = root * root + 6 * root + 20
    n = int(math.ceil(n))
    return n if n % 2 == 1 else n + 1


# -- result records -------------------------------------------------------------


@dataclass
class Series:
    columns: tuple  # (name, unit) pairs
    rows: list = field(default_factory=list)

    def add(self, row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} fields, series has {len(self.columns)} columns")
        self.rows.append(tuple(row))


@dataclass
class ResultRecord:
    config: ExperimentConfig
    series: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    started: float = field(default_factory=time.time)
    finished: float | None = None

    @property
    def config_hash(self) -> str:
        return self.config.content_hash()

    def new_series(self, name: str, columns) -> Series:
        if name in self.series:
            raise ValueError(f"series {name!r} already exists; records are append-only")
        self.series[name] = Series(tuple(columns))
        return self.series[name]

    def add_failure(self, key: str, message: str) -> None:
        if "failures" not in self.series:
            self.new_series("failures", (("point", ""), ("message", "")))
        self.series["failures"].add((key, message))

    def column(self, series: str, name: str) -> np.ndarray:
        s = self.series[series]
        k = [c[0] for c in s.columns].index(name)
        return np.array([r[k] for r in s.rows])


# -- runners -------------------------------------------------------------------


def _solve(cfg: ExperimentConfig, params: ModelParams):
    cache_dir = cfg.cache_dir if cfg.cache else None
    return solve(params, cache_dir=cache_dir)


def _env(cfg: ExperimentConfig, **extra) -> dict:
    return {
        "precision": Precision.parse(cfg.precision).value,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        **extra,
    }


VARIANCE_COLUMNS = (
    ("size", "omega0/omega or N"),
    ("n_max", "quanta"),
    ("window_start", "level index"),
    ("reduced_energy", "E/(omega0 j)"),
    ("sigma2_C", "1"),
    ("Cbar", "1"),
)


def run_variance_sweep(cfg: ExperimentConfig) -> ResultRecord:
    """Slide a microcanonical window over the spectrum and record the variance of C."""
    rec = ResultRecord(cfg)
    series = rec.new_series("variance", VARIANCE_COLUMNS)
    traces = rec.new_series("traces", (("size", ""), ("window_start", "level index"), ("t", "1/omega"), ("C", "1")))
    grid = TimeGrid(cfg.time_step, cfg.time_count)
    lo, hi = cfg.energy_range
    cutoffs = {}
    for size in cfg.sizes:
        params = cfg.params(size)
        cutoffs[str(size)] = params.n_max
        spec = _solve(cfg, params)
        c_op = build_c(params)
        red = spec.reduced
        start = int(np.searchsorted(red, lo))
        while start + cfg.window_width <= spec.size:
            state, mean_e = microcanonical_state(spec, start, cfg.window_width)
            r_e = mean_e / spec.energy_unit
            if r_e > hi:
                break
            try:
                res = variance_protocol(state, spec, c_op, grid)
            except (DynamicsError, SpectralError, ArithmeticError) as exc:
                rec.add_failure(f"size={size},start={start}", str(exc))
            else:
                series.add((size, params.n_max, start, r_e, res.variance, res.mean))
                for t, c in zip(res.times, res.trace):
                    traces.add((size, start, t, c))
            start += cfg.window_stride
    rec.metadata.update(_env(cfg, n_max=cutoffs, time_grid=dataclasses.asdict(grid),
                             window_phases="all amplitudes real positive",
                             window_ordering="energy-sorted, both parities interleaved"))
    rec.finished = time.time()
    return rec


SCALING_COLUMNS = (
    ("size", "omega0/omega or N"),
    ("n_max", "quanta"),
    ("target", "E/(omega0 j)"),
    ("reduced_energy", "E/(omega0 j)"),
    ("sigma2_C", "1"),
    ("gap", "E/(omega0 j)"),
    ("one_minus_abs_c", "1"),
    ("gap_floor", "E/(omega0 j)"),
    ("c_floor", "1"),
)


def _scaling_cell(cfg: ExperimentConfig, size: float):
    """Rows and failures for one size."""
    params = cfg.params(size)
    spec = _solve(cfg, params)
    c_op = build_c(params)
    grid = TimeGrid(cfg.time_step, cfg.time_count)
    eps = EPS[params.precision]
    gap_floor = eps * spec.spectral_norm / spec.energy_unit
    c_floor = eps * math.sqrt(params.basis.product_dim)
    rows, failures = [], []
    quad = params.precision is Precision.QUAD
    for target in cfg.targets:
        try:
            pairs = eigenspace_window(spec, target, cfg.eigenspaces)
            gaps, defects, energies = [], [], []
            for plus, minus in pairs:
                if quad:
                    (ep, em), vecs = spec.refined([plus, minus])
                    gaps.append(abs(float(ep - em)) / spec.energy_unit)
                    v_p, v_m = vecs[:, 0], vecs[:, 1]
                else:
                    gaps.append(abs(spec.energies[plus] - spec.energies[minus]) / spec.energy_unit)
                    v_p, v_m = spec.vectors([plus])[:, 0], spec.vectors([minus])[:, 0]
                fixed = gauge_fix_doublet(v_p, v_m, c_op)
                defects.append(float(1 - fixed.abs_c))
                energies.append(0.5 * (spec.reduced[plus] + spec.reduced[minus]))
            k = int(np.argmin(np.abs(spec.reduced - target)))
            start = min(max(k - 5, 0), spec.size - 10)
            state, _ = microcanonical_state(spec, start, 10)
            var = variance_protocol(state, spec, c_op, grid).variance
        except (SpectralError, DynamicsError, ArithmeticError) as exc:
            failures.append((f"size={size},target={target}", str(exc)))
            continue
        rows.append((size, params.n_max, target, float(np.mean(energies)), var,
                     float(np.mean(gaps)), float(np.mean(defects)), gap_floor, c_floor))
    return rows, failures


def _map_cells(fn, cfg: ExperimentConfig, keys):
    if cfg.workers == 1 or len(keys) == 1:
        return [fn(cfg, k) for k in keys]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, [cfg] * len(keys), keys))


def run_scaling(cfg: ExperimentConfig) -> ResultRecord:
    """Variance, doublet gap and 1-|<E-|C|E+>| near fixed reduced energies versus size."""
    rec = ResultRecord(cfg)
    series = rec.new_series("scaling", SCALING_COLUMNS)
    results = _map_cells(_scaling_cell, cfg, list(cfg.sizes))
    all_rows = []
    for rows, failures in results:
        all_rows.extend(rows)
        for f in failures:
            rec.add_failure(*f)
    for row in sorted(all_rows, key=lambda r: (r[2], r[0])):
        series.add(row)
    rec.metadata.update(_env(cfg, n_max={str(s): cfg.cutoff(s) for s in cfg.sizes},
                             averaging="arithmetic mean over eigenspaces",
                             time_grid=dataclasses.asdict(TimeGrid(cfg.time_step, cfg.time_count))))
    rec.finished = time.time()
    return rec


QUENCH_OBSERVABLES = ("C", "Jx", "quadrature", "n", "Pi")
QUENCH_COLUMNS = (
    ("p", "1"),
    ("phi", "rad"),
    ("C0", "1"),
    ("Pi0", "1"),
    ("reduced_energy_f", "E/(omega0 j)"),
    ("C_avg", "1"),
    ("Jx_avg", "1"),
    ("quadrature_avg", "1"),
    ("n_avg", "quanta"),
    ("Pi_avg", "1"),
    ("S_avg", "nats"),
    ("C_noise", "1"),
    ("Jx_noise", "1"),
    ("quadrature_noise", "1"),
    ("n_noise", "quanta"),
    ("S_noise", "nats"),
    ("C_max_dev", "1"),
    ("Pi_max_dev", "1"),
    ("C_diag", "1"),
    ("dropped_weight", "1"),
)


def run_quench_map(cfg: ExperimentConfig) -> ResultRecord:
    """Long-time averages after quenching superpositions of the ground doublet."""
    rec = ResultRecord(cfg)
    series = rec.new_series("quench", QUENCH_COLUMNS)
    size = cfg.sizes[0]
    if cfg.n_max is not None:
        n_max = cfg.n_max[0]
    else:
        n_max = max(cutoff_rule(cfg.family, size, r, cfg.reduced_energy_max)
                    for r in (cfg.lambda_i_ratio, cfg.lambda_f_ratio))
    p_i = cfg.params(size, cfg.lambda_i_ratio, n_max)
    p_f = cfg.params(size, cfg.lambda_f_ratio, n_max)
    spec_i = _solve(cfg, p_i)
    spec_f = _solve(cfg, p_f)
    c_op = build_c(p_f)
    h_f = build_hamiltonian(p_f)
    ops = {"C": c_op, "Jx": jx_operator(p_f), "quadrature": quadrature_operator(p_f),
           "n": number_operator(p_f), "Pi": parity_operator(p_f)}
    if cfg.entropy:
        ops["S"] = "entropy"
    lo, hi = spec_i.energies[:2]
    doublet = gauge_fix_doublet(*_ground_pair(spec_i), c_op)
    rec.metadata.update(_env(cfg, n_max=n_max, ground_gap=float((hi - lo) / spec_i.energy_unit),
                             ground_one_minus_abs_c=float(1 - doublet.abs_c),
                             total_time=cfg.total_time, samples=cfg.samples))
    for p in cfg.p_grid:
        for k in range(cfg.phi_steps):
            phi = 2 * math.pi * k / cfg.phi_steps
            q = QuenchSpec(cfg.lambda_i_ratio, cfg.lambda_f_ratio, p, phi)
            try:
                psi = quench_initial_state(spec_i, q, c_op, cfg.doublet_tol * spec_i.energy_unit)
            except DynamicsError as exc:
                raise NumericFailure(str(exc)) from exc
            c0 = expectation(psi, c_op)
            pi0 = expectation(psi, ops["Pi"])
            e_f = expectation(psi, h_f) / spec_f.energy_unit
            lt = long_time_average(psi, spec_f, ops, cfg.total_time, cfg.samples)
            av, nz = lt.averages, lt.noise
            s_avg = av.get("S", float("nan"))
            s_noise = nz.get("S", float("nan"))
            c_dev = float(np.max(np.abs(lt.traces["C"] - c0)))
            pi_dev = float(np.max(np.abs(lt.traces["Pi"] - pi0)))
            c_diag = diagonal_ensemble_average(psi, spec_f, c_op)
            series.add((p, phi, c0, pi0, e_f, av["C"], av["Jx"], av["quadrature"], av["n"], av["Pi"], s_avg,
                        nz["C"], nz["Jx"], nz["quadrature"], nz["n"], s_noise, c_dev, pi_dev, c_diag,
                        lt.dropped_weight))
    rec.finished = time.time()
    return rec


def _ground_pair(spec):
    plus, minus = (0, 1) if spec.parity_labels[0] > 0 else (1, 0)
    return spec.vectors([plus])[:, 0], spec.vectors([minus])[:, 0]


CONVERGENCE_COLUMNS = (
    ("size", "omega0/omega or N"),
    ("n_max", "quanta"),
    ("max_rel_change", "1"),
    ("converged_n_max", "quanta"),
)


def _convergence_cell(cfg: ExperimentConfig, size: float):
    params = cfg.params(size, n_max=cfg.schedule[0])
    tracked = levels_below(cfg.tracked_below) if cfg.tracked_below is not None else lowest_levels(cfg.tracked_levels)
    report = convergence_check(params, cfg.schedule, tracked, cfg.rtol, solver=lambda p: _solve(cfg, p))
    return size, report


def run_convergence(cfg: ExperimentConfig) -> ResultRecord:
    """Cutoff self-consistency per size; non-convergence is a record, not an exception."""
    rec = ResultRecord(cfg)
    series = rec.new_series("convergence", CONVERGENCE_COLUMNS)
    adequate = {}
    for size, report in _map_cells(_convergence_cell, cfg, list(cfg.sizes)):
        best = -1 if report.n_max is None else report.n_max
        adequate[str(size)] = report.n_max
        for n, change in report.history:
            series.add((size, n, float("nan") if change is None else change, best))
        if not report.converged:
            rec.add_failure(f"size={size}", report.message)
    rec.metadata.update(_env(cfg, adequate_n_max=adequate, rtol=cfg.rtol))
    rec.finished = time.time()
    return rec


RUNNERS = {
    "variance_sweep": run_variance_sweep,
    "scaling": run_scaling,
    "quench_map": run_quench_map,
    "convergence": run_convergence,
}


def run(cfg: ExperimentConfig) -> ResultRecord:
    return RUNNERS[cfg.kind](cfg)


# -- output --------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    text = str(v)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def csv_text(series: Series) -> str:
    header = ",".join(f"{name} [{unit}]" if unit else name for name, unit in series.columns)
    body = "".join(",".join(_fmt(v) for v in row) + "\n" for row in series.rows)
    return header + "\n" + body


PLOT_AXES = {
    "variance": ("reduced_energy", "sigma2_C"),
    "scaling": ("size", "gap", "one_minus_abs_c"),
    "quench": ("C_avg", "Jx_avg", "quadrature_avg", "n_avg", "S_avg"),
    "convergence": ("n_max", "max_rel_change"),
}


def gnuplot_text(name: str, series: Series) -> str | None:
    axes = PLOT_AXES.get(name)
    if axes is None or not series.rows:
        return None
    names = [c[0] for c in series.columns]
    idx = [names.index(a) for a in axes]
    lines = ["# " + " ".join(axes)]
    for row in series.rows:
        lines.append(" ".join(_fmt(row[i]) for i in idx))
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_outputs(record: ResultRecord, out_dir, formats=("csv", "gnuplot")) -> list[Path]:
    """Write CSV and gnuplot files per non-empty series plus a JSON manifest."""
    out = Path(out_dir)
    written = []
    files = {}
    for name, series in record.series.items():
        if not series.rows:
            continue
        if "csv" in formats:
            text = csv_text(series)
            path = out / f"{name}.csv"
            _atomic_write(path, text)
            files[path.name] = hashlib.sha256(text.encode()).hexdigest()
            written.append(path)
        if "gnuplot" in formats:
            text = gnuplot_text(name, series)
            if text is not None:
                path = out / f"{name}.dat"
                _atomic_write(path, text)
                files[path.name] = hashlib.sha256(text.encode()).hexdigest()
                written.append(path)
    manifest = {
        "config": record.config.to_dict(),
        "config_hash": record.config_hash,
        "metadata": record.metadata,
        "tolerances": {"residual": 1e-10, "imaginary_residue": 1e-10, "norm": 1e-12},
        "files": files,
        "started": record.started,
        "finished": record.finished,
    }
    path = out / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    written.append(path)
    return written


# -- presets -------------------------------------------------------------------

PRESETS = {
    "sweep-rabi": ExperimentConfig(
        kind="variance_sweep", family="rabi", sizes=(300,), name="sweep-rabi", energy_range=(-4.6, 0.5),
    ),
    "sweep-dicke": ExperimentConfig(
        kind="variance_sweep", family="dicke", sizes=(30,), name="sweep-dicke", energy_range=(-4.6, 0.5),
    ),
    "scaling-rabi": ExperimentConfig(
        kind="scaling", family="rabi", sizes=(25, 50, 100, 200, 300), name="scaling-rabi",
        targets=(-2.0, 0.0),
    ),
    "scaling-dicke": ExperimentConfig(
        kind="scaling", family="dicke", sizes=(6, 10, 14, 20, 26, 30), name="scaling-dicke",
        targets=(-2.0, 0.0),
    ),
    "quench": ExperimentConfig(
        kind="quench_map", family="dicke", sizes=(30,), name="quench", reduced_energy_max=-2.5,
    ),
    "quench-normal": ExperimentConfig(
        kind="quench_map", family="dicke", sizes=(30,), name="quench-normal", lambda_f_ratio=0.5,
        reduced_energy_max=0.5,
    ),
    "convergence-dicke": ExperimentConfig(
        kind="convergence", family="dicke", sizes=(30,), name="convergence-dicke",
        schedule=(199, 299, 399, 499), tracked_below=0.0, rtol=1e-8,
    ),
}
