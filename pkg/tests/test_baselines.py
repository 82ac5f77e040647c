import numpy as np
import pytest

from starswipt.ao import AoOptions
from starswipt.baselines import Scheme, run_baseline
from starswipt.model import SolutionState, StarCoefficients, check_feasibility, sum_rate
from starswipt.scenario import SystemConfig, build_channels

FAST = AoOptions(max_outer=5, trials=20)


def test_scheme_parsing():
    assert Scheme.parse("EsMode") is Scheme.ES_MODE
    assert Scheme.parse("equal_amplitude_es") is Scheme.EQUAL_AMPLITUDE_ES
    assert Scheme.parse("ConventionalRis") is Scheme.CONVENTIONAL_RIS
    assert Scheme.parse("without_ris") is Scheme.WITHOUT_RIS
    assert Scheme.parse(Scheme.ES_MODE) is Scheme.ES_MODE
    with pytest.raises(ValueError):
        Scheme.parse("mode_switching")


def test_without_surface_paths_all_schemes_agree():
    cfg = SystemConfig(M=2, N=4)
    bare = build_channels(cfg, 0).without_surface()
    rates = {s: run_baseline(s, bare, cfg, FAST, 3).sum_rate for s in Scheme}
    ref = rates[Scheme.WITHOUT_RIS]
    for scheme, value in rates.items():
        assert value == pytest.approx(ref, rel=1e-6), scheme


def test_conventional_frozen_and_transmission_phase_invariant():
    cfg = SystemConfig(M=2, N=4)
    ch = build_channels(cfg, 1)
    report = run_baseline("conventional", ch, cfg, FAST, 1)
    star = report.solution.star
    assert np.all(star.beta_r == 1.0) and np.all(star.beta_t == 0.0)
    rate = sum_rate(ch, report.solution, cfg)
    for theta_t in (np.full(4, 0.3), np.random.default_rng(0).uniform(0, 6, 4)):
        moved = SolutionState(report.solution.beams,
                              StarCoefficients(star.beta_r, star.beta_t, star.theta_r, theta_t),
                              report.solution.ps)
        assert sum_rate(ch, moved, cfg) == rate


def test_equal_amplitude_frozen():
    cfg = SystemConfig(M=2, N=4)
    ch = build_channels(cfg, 2)
    report = run_baseline("equal_amplitude", ch, cfg, FAST, 2)
    assert np.all(report.solution.star.beta_r == 0.5) and np.all(report.solution.star.beta_t == 0.5)
    assert check_feasibility(ch, report.solution, cfg).feasible


def test_without_ris_independent_of_surface_size():
    for seed in range(3):
        a_cfg, b_cfg = SystemConfig(M=2, N=8), SystemConfig(M=2, N=32)
        a = run_baseline("without_ris", build_channels(a_cfg, seed), a_cfg, FAST, seed)
        b = run_baseline("without_ris", build_channels(b_cfg, seed), b_cfg, FAST, seed)
        assert a.sum_rate == b.sum_rate
        assert a.objective_trace == b.objective_trace
        assert np.array_equal(a.solution.beams.f, b.solution.beams.f)


def test_surface_schemes_beat_no_surface_on_average():
    cfg = SystemConfig(M=2, N=8)
    es, none = [], []
    for seed in range(3):
        ch = build_channels(cfg, seed)
        es.append(run_baseline("es", ch, cfg, FAST, seed).sum_rate)
        none.append(run_baseline("without_ris", ch, cfg, FAST, seed).sum_rate)
    assert np.mean(es) > np.mean(none)
