import copy
import math

import numpy as np
import pytest

import starswipt.ao as ao_module
from starswipt.ao import (CONVERGED, DEGRADED, INFEASIBLE, MAX_ITER, AoOptions, energy_beams, initial_star,
                          initialize_solution, matched_filter,
                          relaxation_bounds, run_ao)
from starswipt.conic import FAILURE, SolverResult
from starswipt.model import PowerSplit, SolutionState, check_feasibility, harvested_energies, sum_rate
from starswipt.experiments import child_seed, trial_streams
from starswipt.scenario import SystemConfig, build_channels, dbm_to_watts

FAST = dict(max_outer=6, trials=20)


def test_options_validation():
    with pytest.raises(ValueError):
        AoOptions(epsilon=0.0)
    with pytest.raises(ValueError):
        AoOptions(max_outer=0)


def test_initialization_contract():
    cfg = SystemConfig(M=3, N=6)
    ch = build_channels(cfg, 0)
    a = initialize_solution(ch, cfg, 5)
    b = initialize_solution(ch, cfg, 5)
    assert np.array_equal(a.beams.f, b.beams.f) and np.array_equal(a.star.theta_r, b.star.theta_r)
    assert a.beams.power == pytest.approx(cfg.P_max, rel=1e-9)
    assert np.allclose(np.linalg.norm(a.beams.f, axis=1) ** 2, cfg.P_max / cfg.K)
    assert np.all(a.star.beta_r + a.star.beta_t == 1.0)
    assert np.all((a.star.theta_r > 0) & (a.star.theta_r <= 2 * np.pi))
    free = initialize_solution(ch, cfg.with_(E_min=0.0), 5)
    assert np.all(free.ps.rho == 0.5)


def _worst_margin(ch, cfg, star, beams):
    ps = PowerSplit(np.zeros(ch.K))
    return float(np.min(harvested_energies(ch, SolutionState(beams, star, ps), cfg)) / cfg.E_min)


def test_energy_beams_restore_floor():
    # matched filter misses a floor here; the max-min energy beams do not
    cfg = SystemConfig(E_min=float(dbm_to_watts(-40.0)))
    channel_rng, solver_rng = trial_streams(child_seed(0, 19))
    ch = build_channels(cfg, channel_rng)
    rng = np.random.default_rng(0)
    for _ in range(5):
        star = initial_star(ch.N, rng)
        mf = matched_filter(ch, star, cfg.P_max)
        restored = energy_beams(ch, star, cfg)
        assert restored.power == pytest.approx(cfg.P_max, rel=1e-9)
        assert _worst_margin(ch, cfg, star, restored) >= _worst_margin(ch, cfg, star, mf) * (1 - 1e-6)
    init_rng = solver_rng.spawn(3)[0]
    star0 = initial_star(ch.N, copy.deepcopy(init_rng))
    assert _worst_margin(ch, cfg, star0, matched_filter(ch, star0, cfg.P_max)) < 1.0
    state = initialize_solution(ch, cfg, init_rng)
    assert not np.any(state.ps.infeasible)
    assert energy_beams(ch, star, cfg.with_(E_min=0.0)) is None


def test_huge_epsilon_runs_one_iteration():
    cfg = SystemConfig(M=2, N=4)
    ch = build_channels(cfg, 1)
    report = run_ao(ch, cfg, AoOptions(epsilon=1e9, **FAST), 1)
    assert report.iterations == 1 and report.status == CONVERGED
    assert len(report.objective_trace) == 2


def test_small_instance_improves_on_start():
    cfg = SystemConfig(M=2, N=2, K_r=1, K_t=1)
    for seed in range(3):
        ch = build_channels(cfg, seed)
        init = initialize_solution(ch, cfg, np.random.default_rng(seed).spawn(3)[0])
        report = run_ao(ch, cfg, AoOptions(**FAST), seed)
        assert report.objective_trace[0] == pytest.approx(sum_rate(ch, init, cfg))
        assert report.sum_rate >= report.objective_trace[0]


@pytest.mark.parametrize("joint", [True, False])
def test_trace_monotone_and_final_feasible(joint):
    cfg = SystemConfig(M=3, N=6)
    for seed in range(3):
        ch = build_channels(cfg, seed)
        report = run_ao(ch, cfg, AoOptions(joint_split=joint, **FAST), seed)
        trace = report.objective_trace
        assert all(b >= a * (1 - 1e-6) for a, b in zip(trace, trace[1:]))
        assert check_feasibility(ch, report.solution, cfg, 1e-6).feasible
        assert report.sum_rate == pytest.approx(sum_rate(ch, report.solution, cfg), rel=1e-12)
        assert report.status in (CONVERGED, MAX_ITER)


def test_deterministic_reports():
    cfg = SystemConfig(M=2, N=4)
    ch = build_channels(cfg, 3)
    a = run_ao(ch, cfg, AoOptions(**FAST), 9)
    b = run_ao(ch, cfg, AoOptions(**FAST), 9)
    assert a.objective_trace == b.objective_trace
    assert np.array_equal(a.solution.beams.f, b.solution.beams.f)
    assert a.solver_statuses == b.solver_statuses


def test_bound_sandwich():
    cfg = SystemConfig(M=2, N=3)
    ch = build_channels(cfg, 4)
    opts = AoOptions(**FAST)
    report = run_ao(ch, cfg, opts, 4)
    bounds = relaxation_bounds(ch, report.solution, cfg, opts)
    assert set(bounds) == {"p2", "p3"}
    assert report.sum_rate <= min(bounds.values()) / math.log(2) + 1e-6


def test_unreachable_floor_reports_infeasible():
    cfg = SystemConfig(M=2, N=2, E_min=1.0)
    ch = build_channels(cfg, 0)
    report = run_ao(ch, cfg, AoOptions(**FAST), 0)
    assert report.status == INFEASIBLE and report.iterations == 0
    assert not report.feasibility.feasible


def test_two_stalls_degrade(monkeypatch):
    cfg = SystemConfig(M=2, N=2)
    ch = build_channels(cfg, 0)
    monkeypatch.setattr(ao_module, "solve_conic",
                        lambda *a, **k: SolverResult(FAILURE, [], float("nan"), 0, {}))
    report = run_ao(ch, cfg, AoOptions(**FAST), 0)
    assert report.status == DEGRADED
    # the start point is kept and remains feasible
    assert check_feasibility(ch, report.solution, cfg).feasible
    assert [s for _, _, s in report.solver_statuses][:2] == [FAILURE, FAILURE]


def test_one_stall_keeps_previous_block(monkeypatch):
    cfg = SystemConfig(M=2, N=2)
    ch = build_channels(cfg, 0)
    real = ao_module.solve_conic
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            return SolverResult(FAILURE, [], float("nan"), 0, {})
        return real(*args, **kwargs)

    monkeypatch.setattr(ao_module, "solve_conic", flaky)
    report = run_ao(ch, cfg, AoOptions(**FAST), 0)
    assert report.status in (CONVERGED, MAX_ITER)
    assert report.stages[0]["status"] == FAILURE


def test_verbose_log_lines(capsys):
    cfg = SystemConfig(M=2, N=2)
    ch = build_channels(cfg, 0)
    run_ao(ch, cfg, AoOptions(verbose=True, max_outer=1, trials=5), 0)
    lines = capsys.readouterr().err.strip().splitlines()
    assert [line.split()[1] for line in lines] == ["stage=beams", "stage=surface", "stage=split"]
    assert all(line.startswith("iter=1 ") and "objective=" in line and "ms=" in line for line in lines)


def test_flags_run():
    cfg = SystemConfig(M=2, N=3)
    ch = build_channels(cfg, 2)
    for flags in (dict(paper_literal_aux=True), dict(phase_only_recovery=True), dict(first_diag_half=True),
                  dict(equal_power_split=True), dict(backend="clarabel")):
        report = run_ao(ch, cfg, AoOptions(max_outer=2, trials=10, **flags), 2)
        assert report.status in (CONVERGED, MAX_ITER), flags
        assert check_feasibility(ch, report.solution, cfg).feasible
        if flags.get("equal_power_split"):
            assert np.all(report.solution.ps.rho == 0.5)


def test_report_summary_and_timing():
    cfg = SystemConfig(M=2, N=2)
    report = run_ao(build_channels(cfg, 0), cfg, AoOptions(**FAST), 0)
    text = report.summary()
    assert "sum rate" in text and "iterations" in text
    assert report.wall_ms > 0 and set(report.stage_ms) == {"beams", "surface", "split"}
