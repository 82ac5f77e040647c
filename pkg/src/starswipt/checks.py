"""Fast oracle and invariant self-checks behind ``starswipt check``."""

from __future__ import annotations

import math
import time

import numpy as np

from .ao import AoOptions, initialize_solution, run_ao
from .conic import Affine, ConicProblem, solve_conic
from .model import PowerSplit, SolutionState, check_feasibility, harvested_energies, sum_rate
from .recovery import optimal_power_split
from .scenario import SystemConfig, build_channels
from .sdr import p2_surrogate, p3_surrogate, update_auxiliary


def grid_maximize(x, lo=1e-3, hi=1e3, points=2001):
    """Two-stage log-grid maximizer of -t x + ln t + 1 for each entry of ``x``."""
    x = np.asarray(x, dtype=float)[:, None]
    coarse = np.exp(np.linspace(np.log(lo), np.log(hi), points))
    step = np.log(coarse[1] / coarse[0])
    best = coarse[np.argmax(-x * coarse + np.log(coarse), axis=1)]
    fine = best[:, None] * np.exp(np.linspace(-step, step, points))[None, :]
    values = -x * fine + np.log(fine) + 1.0
    idx = np.argmax(values, axis=1)
    rows = np.arange(len(x))
    return fine[rows, idx], values[rows, idx], 2.0 * step / (points - 1)


def check_log_identity(samples=1000, seed=0):
    """max_t (-t x + ln t + 1) = -ln x, attained at t = 1/x."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.01, 100.0, samples)
    t, value, resolution = grid_maximize(x)
    t_err = float(np.max(np.abs(np.log(t * x))))
    value_err = float(np.max(np.abs(value + np.log(x))))
    ok = t_err <= resolution and value_err <= 1e-9
    return ok, f"argmax log-error {t_err:.1e} (resolution {resolution:.1e}), value error {value_err:.1e}"


def lambda_max_problem(A):
    n = A.shape[0]
    prob = ConicProblem()
    prob.add_variable("F", n)
    prob.linear = Affine(0.0, {0: A})
    prob.add_constraint(Affine(-1.0, {0: np.eye(n)}), "<=")
    return prob


def check_lambda_max(count=20, n=4, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        A = 0.5 * (Z + Z.conj().T)
        result = solve_conic(lambda_max_problem(A))
        worst = max(worst, abs(result.objective - np.linalg.eigvalsh(A)[-1]))
    return worst <= 1e-6, f"worst |objective - lambda_max| = {worst:.2e}"


def check_surrogate_tightness(count=5, seed=0):
    config = SystemConfig(M=4, N=8)
    worst = 0.0
    for i in range(count):
        channels = build_channels(config, seed + i)
        state = initialize_solution(channels, config, seed + i)
        target = math.log(2.0) * sum_rate(channels, state, config)
        weights = update_auxiliary(channels, state, config)
        for value in (p2_surrogate(channels, state, config, weights.S),
                      p3_surrogate(channels, state, config, weights.q)):
            worst = max(worst, abs(value - target) / target)
    return worst <= 1e-8, f"worst relative gap {worst:.1e}"


def check_power_split(count=50, seed=0):
    rng = np.random.default_rng(seed)
    config = SystemConfig(M=4, N=8)
    channels = build_channels(config, seed)
    worst, interior = 0.0, 0
    for _ in range(count):
        state = initialize_solution(channels, config, rng)
        beams = state.beams
        beams.f = beams.f * rng.uniform(0.05, 1.0)
        ps = optimal_power_split(channels, state.star, beams, config)
        inside = (ps.rho > 0) & (ps.rho < 1)
        energy = harvested_energies(channels, SolutionState(beams, state.star, PowerSplit(ps.rho)), config)
        if np.any(inside):
            interior += 1
            worst = max(worst, float(np.max(np.abs(energy[inside] / config.E_min - 1.0))))
    return worst <= 1e-9 and interior > 0, f"{interior} instances, worst relative EH gap {worst:.1e}"


def check_short_ao(seed=0):
    config = SystemConfig(M=2, N=4)
    channels = build_channels(config, seed)
    report = run_ao(channels, config, AoOptions(max_outer=5, trials=10), seed)
    trace = report.objective_trace
    monotone = all(b >= a * (1 - 1e-6) for a, b in zip(trace, trace[1:]))
    feasible = check_feasibility(channels, report.solution, config).feasible
    return monotone and feasible, f"status {report.status}, {report.iterations} iterations, rate {report.sum_rate:.4f}"


CHECKS = (
    ("log identity oracle", check_log_identity),
    ("conic lambda_max oracle", check_lambda_max),
    ("surrogate tightness", check_surrogate_tightness),
    ("PS closed-form EH activity", check_power_split),
    ("AO monotone and feasible", check_short_ao),
)


def run_checks(stream=None):
    """Run every check, print one line each, return True when all pass."""
    all_ok = True
    for name, check in CHECKS:
        start = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        ms = 1e3 * (time.perf_counter() - start)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({ms:.0f} ms)", file=stream)
    return all_ok
