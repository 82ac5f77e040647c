import math
import os

import numpy as np
import pytest

import starswipt.experiments as ex
from starswipt.ao import AoOptions
from starswipt.baselines import Scheme
from starswipt.experiments import (COLUMNS, ResultRow, SweepSpec, child_seed, load_sweep, read_results,
                                   read_summary, rows_to_csv, run_sweep, summarize, summary_path,
                                   write_results)
from starswipt.scenario import SystemConfig

TINY = dict(config=SystemConfig(M=2, N=2), options=AoOptions(max_outer=2, trials=5))


def row(seed=1, scheme="es", rate=1.0, status="converged", N=8, e=-50.0):
    return ResultRow(seed, scheme, N, 4, 4, 2, 42.0, e, rate, 3, status, None)


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(axis="K", values=[1])
    with pytest.raises(ValueError):
        SweepSpec(axis="N", values=[])
    with pytest.raises(ValueError):
        SweepSpec(axis="N", values=[8, 8])
    with pytest.raises(ValueError):
        SweepSpec(axis="N", values=[16, 8])
    with pytest.raises(ValueError):
        SweepSpec(axis="N", values=[8], trials=0)
    with pytest.raises(ValueError):
        SweepSpec(axis="N", values=[8], schemes=[])


def test_child_seed_stable_and_distinct():
    assert child_seed(0, 0) == child_seed(0, 0)
    seeds = {child_seed(r, t) for r in range(5) for t in range(50)}
    assert len(seeds) == 250
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_cardinality_and_order(tmp_path):
    spec = SweepSpec(axis="N", values=[2, 3], schemes=["es", "without_ris"], trials=3,
                     output=str(tmp_path / "r.csv"), **TINY)
    rows = run_sweep(spec)
    assert len(rows) == 12
    keys = [(r.N, r.scheme) for r in rows]
    assert keys == [(n, s) for n in (2, 3) for s in ("es", "without_ris") for _ in range(3)]
    assert [r.seed for r in rows[:3]] == [child_seed(0, t) for t in range(3)]
    assert all(r.sum_rate_bits_per_s_hz >= 0 for r in rows if not r.failed)
    no_ris = {(r.N, r.seed): r.sum_rate_bits_per_s_hz for r in rows if r.scheme == "without_ris"}
    for t in range(3):
        s = child_seed(0, t)
        assert no_ris[(2, s)] == no_ris[(3, s)]


def test_failures_become_rows(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = ex.run_baseline

    def sometimes_broken(scheme, *args):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("boom")
        return real(scheme, *args)

    monkeypatch.setattr(ex, "run_baseline", sometimes_broken)
    spec = SweepSpec(axis="M", values=[2], schemes=["without_ris"], trials=3, output=str(tmp_path / "r.csv"),
                     **TINY)
    rows = run_sweep(spec)
    assert [r.status for r in rows][1] == "error" and math.isnan(rows[1].sum_rate_bits_per_s_hz)
    assert rows[0].status != "error" and rows[2].status != "error"


def test_unwritable_output_fails_before_solving(tmp_path, monkeypatch):
    monkeypatch.setattr(ex, "run_task", lambda *a: pytest.fail("solve started"))
    spec = SweepSpec(axis="N", values=[2], output=str(tmp_path / "missing" / "r.csv"), **TINY)
    with pytest.raises(OSError):
        run_sweep(spec)
    assert not os.path.exists(tmp_path / "missing")


def test_header_only_and_csv_format(tmp_path):
    path = tmp_path / "empty.csv"
    write_results([], str(path))
    assert path.read_bytes() == (",".join(COLUMNS) + "\n").encode()
    text = rows_to_csv([row(rate=0.1 + 0.2)])
    assert "0.30000000000000004" in text and "\r" not in text


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip(tmp_path, fmt):
    rows = [row(seed=2 ** 63 + 5, rate=1 / 3), row(scheme="without_ris", rate=float("nan"), status="infeasible"),
            ResultRow(7, "conventional", 16, 2, 4, 2, 42.0, -math.inf, 12.5, 0, "error", 12.25)]
    path = str(tmp_path / f"r.{fmt}")
    write_results(rows, path, fmt)
    back = read_results(path)
    assert len(back) == len(rows)
    for a, b in zip(rows, back):
        for c in COLUMNS:
            x, y = getattr(a, c), getattr(b, c)
            if isinstance(x, float) and math.isnan(x):
                assert math.isnan(y)
            else:
                assert x == y, c


def test_summary_arithmetic_and_consistency(tmp_path):
    rows = [row(seed=1, rate=1.0), row(seed=2, rate=3.0), row(seed=3, rate=float("nan"), status="infeasible"),
            row(seed=1, scheme="without_ris", rate=2.0)]
    entries = {e["scheme"]: e for e in summarize(rows)}
    assert entries["es"]["mean_sum_rate"] == 2.0 and entries["es"]["trials"] == 2
    assert entries["es"]["std_sum_rate"] == pytest.approx(np.std([1.0, 3.0], ddof=1))
    assert entries["without_ris"]["std_sum_rate"] == 0.0

    path = str(tmp_path / "r.csv")
    write_results(rows, path)
    raw = read_results(path)
    for entry in read_summary(summary_path(path)):
        rates = [r.sum_rate_bits_per_s_hz for r in raw if r.scheme == entry["scheme"] and not r.failed]
        assert abs(entry["mean_sum_rate"] - np.mean(rates)) <= 1e-12


def test_byte_identical_repeat(tmp_path):
    spec = SweepSpec(axis="E_min_dbm", values=[-55, -50], schemes=["es"], trials=2, **TINY,
                     output=str(tmp_path / "a.csv"))
    write_results(run_sweep(spec), spec.output)
    first = open(spec.output, "rb").read()
    write_results(run_sweep(spec), spec.output)
    assert open(spec.output, "rb").read() == first


def test_load_sweep_file(tmp_path):
    path = tmp_path / "sweep"
    path.write_text("axis = N\nvalues = [4, 8]\nschemes = [es, without_ris]\ntrials = 3\nm = 2\n"
                    "max_outer = 4\noutput = out.csv\n")
    spec = load_sweep(str(path))
    assert spec.axis == "N" and spec.values == [4, 8] and spec.trials == 3
    assert spec.schemes == [Scheme.ES_MODE, Scheme.WITHOUT_RIS]
    assert spec.config.M == 2 and spec.options.max_outer == 4 and spec.output == "out.csv"
    assert spec.point_config(8).N == 8


def test_shipped_sweep_files_parse():
    root = os.path.join(os.path.dirname(__file__), "..", "sweeps")
    for name in ("fig2_n_sweep", "fig3_m_sweep", "fig4_emin_sweep"):
        spec = load_sweep(os.path.join(root, name))
        assert spec.trials >= 20 and len(spec.schemes) == 4
