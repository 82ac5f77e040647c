"""Seeded Monte-Carlo sweeps over N, M or E_min and their CSV/JSONL persistence."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ao import AoOptions
from .baselines import Scheme, run_baseline
from .config import ConfigError, configs_from_pairs, read_pairs
from .scenario import SystemConfig, build_channels, dbm_to_watts, watts_to_dbm

AXES = ("N", "M", "E_min_dbm")
ERROR = "error"
OK_STATUSES = ("converged", "max_iter")
COLUMNS = ("seed", "scheme", "N", "M", "K", "K_r", "P_max_dbm", "E_min_dbm",
           "sum_rate_bits_per_s_hz", "iterations", "status", "wall_ms")
SUMMARY_COLUMNS = ("scheme", "N", "M", "E_min_dbm", "mean_sum_rate", "std_sum_rate", "trials")


def child_seed(root_seed, trial):
    """64-bit seed for one trial.

    Depends only on the root seed and the trial index, so every scheme and
    every sweep point sees the same channel realization for a given trial.
    """
    state = np.random.SeedSequence(int(root_seed), spawn_key=(int(trial),)).generate_state(1, np.uint64)
    return int(state[0])


def trial_streams(seed):
    """Independent (channel, solver) generators for one child seed."""
    channel_seq, solver_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(channel_seq), np.random.default_rng(solver_seq)


@dataclass
class SweepSpec:
    axis: str
    values: list
    schemes: list = field(default_factory=lambda: list(Scheme))
    trials: int = 20
    config: SystemConfig = field(default_factory=SystemConfig)
    options: AoOptions = field(default_factory=AoOptions)
    output: str = "results.csv"
    root_seed: int = 0
    record_timing: bool = False

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if len(self.values) == 0:
            raise ValueError("values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("values must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        self.schemes = [Scheme.parse(s) for s in self.schemes]
        if not self.schemes:
            raise ValueError("schemes must be non-empty")
        if self.axis in ("N", "M"):
            self.values = [int(v) for v in self.values]

    def point_config(self, value):
        if self.axis == "N":
            return self.config.with_(N=value)
        if self.axis == "M":
            return self.config.with_(M=value)
        return self.config.with_(E_min=float(dbm_to_watts(value)) if value is not None else 0.0)

    def tasks(self):
        for value in self.values:
            for scheme in self.schemes:
                for trial in range(self.trials):
                    yield self.point_config(value), scheme, child_seed(self.root_seed, trial)


SWEEP_KEYS = ("axis", "values", "schemes", "trials", "output", "root_seed", "record_timing")


def load_sweep(path, base_config=None):
    """Read a sweep file: the sweep keys plus any config/solver keys.

    Keys from ``base_config`` (another flat file) apply first; the sweep
    file's own keys override them.
    """
    pairs = read_pairs(base_config) if base_config else {}
    pairs.update(read_pairs(path))
    sweep = {k: pairs.pop(k) for k in SWEEP_KEYS if k in pairs}
    config, options = configs_from_pairs(pairs)
    if "axis" not in sweep or "values" not in sweep:
        raise ConfigError("axis" if "axis" not in sweep else "values", "required in a sweep file")
    values = sweep["values"] if isinstance(sweep["values"], list) else [sweep["values"]]
    schemes = sweep.get("schemes", [s.value for s in Scheme])
    if not isinstance(schemes, list):
        schemes = [schemes]
    try:
        return SweepSpec(axis=str(sweep["axis"]), values=values, schemes=schemes,
                         trials=int(sweep.get("trials", 20)), config=config, options=options,
                         output=str(sweep.get("output", "results.csv")),
                         root_seed=int(sweep.get("root_seed", 0)),
                         record_timing=bool(sweep.get("record_timing", False)))
    except ValueError as exc:
        text = str(exc)
        key = next((k for k in SWEEP_KEYS if text.startswith(k)), "sweep")
        raise ConfigError(key, text) from None


@dataclass(frozen=True)
class ResultRow:
    seed: int
    scheme: str
    N: int
    M: int
    K: int
    K_r: int
    P_max_dbm: float
    E_min_dbm: float
    sum_rate_bits_per_s_hz: float
    iterations: int
    status: str
    wall_ms: float | None = None

    @property
    def failed(self):
        return self.status not in OK_STATUSES


def _e_min_dbm(config):
    return float(watts_to_dbm(config.E_min)) if config.E_min > 0 else -math.inf


def run_task(config, scheme, seed, options, record_timing=False):
    """One (point, scheme, trial) solve; exceptions become an ``error`` row."""
    start = time.perf_counter()
    channel_rng, solver_rng = trial_streams(seed)
    try:
        channels = build_channels(config, channel_rng)
        report = run_baseline(scheme, channels, config, options, solver_rng)
        rate = report.sum_rate if report.objective_trace else math.nan
        status, iterations = report.status, report.iterations
    except Exception:
        if options.verbose:
            traceback.print_exc()
        rate, status, iterations = math.nan, ERROR, 0
    wall = 1e3 * (time.perf_counter() - start) if record_timing else None
    return ResultRow(seed, Scheme.parse(scheme).value, config.N, config.M, config.K, config.K_r,
                     float(config.P_max_dbm), _e_min_dbm(config), float(rate), int(iterations), status, wall)


def _run_packed(args):
    return run_task(*args)


def check_writable(path):
    """Fail early if ``path`` cannot be created or written."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise OSError(f"output directory does not exist: {directory}")
    existed = os.path.exists(path)
    with open(path, "a", encoding="utf-8"):
        pass
    if not existed:
        os.remove(path)


def run_sweep(spec, threads=1, check_output=True):
    """All rows of a sweep, ordered by point, then scheme, then trial."""
    if check_output and spec.output:
        check_writable(spec.output)
    jobs = [(cfg, scheme, seed, spec.options, spec.record_timing) for cfg, scheme, seed in spec.tasks()]
    if threads <= 1:
        return [_run_packed(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_packed, jobs))


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_format(getattr(row, c)) for c in COLUMNS])
    return buffer.getvalue()


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def summarize(rows):
    """Per (scheme, N, M, E_min_dbm): mean, sample std and count of finite rates."""
    groups = {}
    for row in rows:
        key = (row.scheme, row.N, row.M, row.E_min_dbm)
        bucket = groups.setdefault(key, [])
        if not row.failed and math.isfinite(row.sum_rate_bits_per_s_hz):
            bucket.append(row.sum_rate_bits_per_s_hz)
    out = []
    for key, rates in groups.items():
        mean = math.fsum(rates) / len(rates) if rates else math.nan
        std = float(np.std(rates, ddof=1)) if len(rates) > 1 else (0.0 if rates else math.nan)
        out.append({"scheme": key[0], "N": key[1], "M": key[2], "E_min_dbm": key[3],
                    "mean_sum_rate": mean, "std_sum_rate": std, "trials": len(rates)})
    return out


def summary_path(path):
    root, _ = os.path.splitext(path)
    return root + ".summary.csv"


def write_results(rows, path, format="csv"):
    """Write the rows and a ``<stem>.summary.csv`` sidecar."""
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "jsonl":
        text = "".join(json.dumps({c: _json_value(getattr(r, c)) for c in COLUMNS}) + "\n" for r in rows)
    else:
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for entry in summarize(rows):
        writer.writerow([_format(entry[c]) for c in SUMMARY_COLUMNS])
    with open(summary_path(path), "w", encoding="utf-8", newline="") as handle:
        handle.write(buffer.getvalue())


_INT_COLUMNS = {"seed", "N", "M", "K", "K_r", "iterations"}
_STR_COLUMNS = {"scheme", "status"}


def _parse_field(name, value):
    if name in _STR_COLUMNS:
        return value
    if value == "" or value is None:
        return None
    if name in _INT_COLUMNS:
        return int(value)
    return float(value)


def read_results(path, format=None):
    """Parse rows written by :func:`write_results`."""
    if format is None:
        format = "jsonl" if path.endswith(".jsonl") else "csv"
    with open(path, encoding="utf-8", newline="") as handle:
        if format == "jsonl":
            records = [json.loads(line) for line in handle if line.strip()]
            records = [{k: (str(v) if k in _STR_COLUMNS else v) for k, v in r.items()} for r in records]
        else:
            records = list(csv.DictReader(handle))
    return [ResultRow(**{c: _parse_field(c, r[c]) for c in COLUMNS}) for r in records]


def read_summary(path):
    with open(path, encoding="utf-8", newline="") as handle:
        records = list(csv.DictReader(handle))
    out = []
    for r in records:
        out.append({"scheme": r["scheme"], "N": int(r["N"]), "M": int(r["M"]),
                    "E_min_dbm": float(r["E_min_dbm"]), "mean_sum_rate": float(r["mean_sum_rate"]),
                    "std_sum_rate": float(r["std_sum_rate"]), "trials": int(r["trials"])})
    return out


__all__ = ["AXES", "COLUMNS", "SUMMARY_COLUMNS", "SweepSpec", "ResultRow", "child_seed", "trial_streams",
           "load_sweep", "run_task", "run_sweep", "write_results", "read_results", "read_summary",
           "summarize", "summary_path", "rows_to_csv", "check_writable"]
