"""Alternating optimization over beamformers, surface coefficients and PS ratios."""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import Affine, ConicProblem, solve_conic
from .model import (BeamformerSet, PowerSplit, SolutionState, StarCoefficients, check_feasibility,
                    effective_channels, harvested_energies, sum_rate)
from .recovery import (RandomizationOptions, RecoveryError, optimal_power_split, rank_ratios,
                       recover_beamformers, recover_star_coefficients)
from .scenario import as_generator
from .sdr import (ES, REFLECT_ONLY, SURFACE_MODES, build_p2, build_p3, lifted_from_result,
                  update_auxiliary)

CONVERGED = "converged"
MAX_ITER = "max_iter"
DEGRADED = "degraded"
INFEASIBLE = "infeasible"


@dataclass
class AoOptions:
    epsilon: float = 1e-3
    max_outer: int = 30
    trials: int = 50
    rank_tol: float = 1e-3
    feas_tol: float = 1e-6
    solver_tol: float = 1e-8
    solver_max_iter: int = 200
    backend: str = "cvxopt"
    paper_literal_aux: bool = False
    phase_only_recovery: bool = False
    first_diag_half: bool = False
    equal_power_split: bool = False
    joint_split: bool = True
    verbose: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class SolveReport:
    status: str
    solution: SolutionState
    objective_trace: list
    iterations: int
    stages: list = field(default_factory=list)
    feasibility: object = None
    rank_ratios: list = field(default_factory=list)
    bounds: dict = field(default_factory=dict)
    stage_ms: dict = field(default_factory=dict)
    wall_ms: float = 0.0

    @property
    def sum_rate(self):
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    @property
    def solver_statuses(self):
        return [(s["iteration"], s["stage"], s["status"]) for s in self.stages]

    def summary(self):
        lines = [
            f"status      {self.status}",
            f"sum rate    {self.sum_rate:.6f} bits/s/Hz",
            f"iterations  {self.iterations}",
            f"trace       {' '.join(f'{r:.4f}' for r in self.objective_trace)}",
            f"feasible    {self.feasibility.feasible if self.feasibility else 'n/a'}",
            f"wall        {self.wall_ms:.1f} ms",
        ]
        return "\n".join(lines)


def initial_star(N, rng, mode=ES):
    theta_r = rng.uniform(0.0, 2.0 * np.pi, size=N)
    theta_t = rng.uniform(0.0, 2.0 * np.pi, size=N)
    if mode == REFLECT_ONLY:
        return StarCoefficients(np.ones(N), np.zeros(N), theta_r, theta_t)
    return StarCoefficients.equal_split(theta_r, theta_t)


def matched_filter(channels, star, P_max):
    """Equal-power maximum-ratio beams towards each effective channel."""
    A = effective_channels(channels, star)
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    f = np.conj(A) / np.where(norms > 0, norms, 1.0)
    return BeamformerSet(f * np.sqrt(P_max / channels.K))


def energy_beams(channels, star, config, rho=0.0):
    """Beams maximizing the worst ratio of harvested energy to its floor.

    Solves max tau s.t. Tr(R_k X) >= tau * need_k, Tr X <= P_max over the
    transmit covariance X, where need_k is the received power user k needs
    at PS ratio ``rho``, then splits X into K beams along its eigenvectors.
    Returns None when no user needs restoring or the solve fails.
    """
    A = effective_channels(channels, star)
    need = config.E_min / (config.eta_vector * (1.0 - rho)) - config.sigma2
    users = np.flatnonzero(need > 0)
    if users.size == 0:
        return None
    M = channels.M
    prob = ConicProblem()
    X = prob.add_variable("X", M)
    tau = prob.add_variable("tau", 1)
    for k in users:
        R = config.P_max * np.outer(np.conj(A[k]), A[k]) / need[k]
        prob.add_constraint(Affine(0.0).add(X, R).add(tau, np.eye(1), -1.0), ">=")
    prob.add_constraint(Affine(-1.0).add(X, np.eye(M)), "<=")
    prob.linear = Affine(0.0).add(tau, np.eye(1))
    result = solve_conic(prob)
    if not result.ok:
        return None
    w, U = np.linalg.eigh(result.values[0])
    w, U = np.clip(w[::-1], 0.0, None), U[:, ::-1]
    f = np.zeros((channels.K, M), dtype=complex)
    for k in range(min(channels.K, M)):
        f[k] = np.sqrt(w[k]) * U[:, k]
    total = np.sum(np.abs(f) ** 2)
    return BeamformerSet(f * np.sqrt(config.P_max / total)) if total > 0 else None


def initialize_solution(channels, config, rng=None, mode=ES, equal_power_split=False):
    """Random phases, equal amplitude split, matched-filter beams at full power.

    PS ratios come from the closed form; a ratio of exactly 1 (no EH floor)
    is replaced by 0.5. If the matched filter cannot meet every EH floor the
    beams are replaced by :func:`energy_beams`. Floors that stay unreachable
    show up in ``solution.ps.infeasible``.
    """
    rng = as_generator(rng)
    star = initial_star(channels.N, rng, mode)
    beams = matched_filter(channels, star, config.P_max)
    rho0 = 0.5 if equal_power_split else 0.0
    if np.any(_floor_missed(channels, star, beams, config, rho0)):
        restored = energy_beams(channels, star, config, rho0)
        beams = restored if restored is not None else beams
    if equal_power_split:
        ps = PowerSplit(np.full(channels.K, 0.5))
        ok = check_feasibility(channels, SolutionState(beams, star, ps), config).eh_ok
        ps.infeasible = ~ok
    else:
        ps = optimal_power_split(channels, star, beams, config)
        ps.rho = np.where(ps.rho >= 1.0, 0.5, ps.rho)
    return SolutionState(beams, star, ps)


def _floor_missed(channels, star, beams, config, rho):
    energy = harvested_energies(channels, SolutionState(beams, star, PowerSplit(np.full(channels.K, rho))),
                                config)
    return energy < config.E_min


class _Tracker:
    def __init__(self, opts):
        self.opts = opts
        self.stages = []
        self.stage_ms = {}

    def record(self, iteration, stage, objective, status, ms):
        self.stages.append({"iteration": iteration, "stage": stage, "objective": objective,
                            "status": status, "ms": ms})
        self.stage_ms[stage] = self.stage_ms.get(stage, 0.0) + ms
        if self.opts.verbose:
            print(f"iter={iteration} stage={stage} objective={objective:.6f} status={status} ms={ms:.1f}",
                  file=sys.stderr)


def run_ao(channels, config, opts=None, rng=None, surface_mode=ES):
    """Alternate beamformer, surface and PS-ratio updates until the rate settles.

    Each outer iteration solves the lifted beam problem with fresh weights
    and recovers rank-1 beams, then (unless ``surface_mode`` is None) does
    the same for the surface, then applies the closed-form PS ratios. A
    block update is kept only if it is feasible and does not lower the
    true sum rate, so the returned solution is the best iterate seen.
    Stops when the relative rate change is at most ``epsilon`` or after
    ``max_outer`` iterations, whichever comes first.
    """
    opts = opts or AoOptions()
    if surface_mode is not None and surface_mode not in SURFACE_MODES:
        raise ValueError(f"unknown surface mode {surface_mode!r}")
    rng = as_generator(rng)
    init_rng, beam_rng, star_rng = rng.spawn(3)
    start = time.perf_counter()
    tracker = _Tracker(opts)

    init_mode = surface_mode if surface_mode is not None else ES
    state = initialize_solution(channels, config, init_rng, init_mode, opts.equal_power_split)
    if np.any(state.ps.infeasible):
        return SolveReport(INFEASIBLE, state, [], 0, feasibility=check_feasibility(channels, state, config),
                           wall_ms=1e3 * (time.perf_counter() - start))

    rate = sum_rate(channels, state, config)
    trace = [rate]
    ratios, bounds = [], {}
    beam_opts = RandomizationOptions(opts.trials, beam_rng, opts.feas_tol, opts.rank_tol)
    star_opts = RandomizationOptions(opts.trials, star_rng, opts.feas_tol, opts.rank_tol)
    first_diag = 0.5 if opts.first_diag_half else 1.0
    joint = opts.joint_split and not opts.equal_power_split

    def with_split(beams, star, ps):
        if not joint:
            return SolutionState(beams, star, ps)
        return SolutionState(beams, star, optimal_power_split(channels, star, beams, config))
    status = MAX_ITER
    stalls = 0
    iteration = 0

    def accept(candidate):
        nonlocal state, rate
        if not check_feasibility(channels, candidate, config, opts.feas_tol).feasible:
            return False
        new_rate = sum_rate(channels, candidate, config)
        if new_rate >= rate:
            state, rate = candidate, new_rate
            return True
        return False

    def solve(problem):
        return solve_conic(problem, tol=opts.solver_tol, max_iter=opts.solver_max_iter, backend=opts.backend)

    for iteration in range(1, opts.max_outer + 1):
        previous = rate

        t0 = time.perf_counter()
        weights = update_auxiliary(channels, state, config, paper_literal=opts.paper_literal_aux)
        result = solve(build_p2(channels, state.star, state.ps, weights.S, config, joint_split=joint))
        label = result.status
        if result.ok:
            stalls = 0
            bounds["p2"] = result.objective
            F = result.values[:channels.K]
            ratios.append(rank_ratios(F))
            try:
                beams = recover_beamformers(F, channels, state.star, None if joint else state.ps, config,
                                            beam_opts)
                accept(with_split(beams, state.star, state.ps))
            except RecoveryError:
                label = f"{label}/recovery-failed"
        else:
            stalls += 1
        tracker.record(iteration, "beams", rate, label, 1e3 * (time.perf_counter() - t0))
        if stalls >= 2:
            status = DEGRADED
            break

        if surface_mode is not None:
            t0 = time.perf_counter()
            weights = update_auxiliary(channels, state, config, paper_literal=opts.paper_literal_aux)
            result = solve(build_p3(channels, state.beams, state.ps, weights.q, config,
                                    mode=surface_mode, first_diag=first_diag, joint_split=joint))
            label = result.status
            if result.ok:
                stalls = 0
                bounds["p3"] = result.objective
                try:
                    star = recover_star_coefficients(
                        lifted_from_result(result, surface_mode), channels, state.beams,
                        None if joint else state.ps, config, star_opts, mode=surface_mode,
                        reference=state.star, phase_only=opts.phase_only_recovery)
                    accept(with_split(state.beams, star, state.ps))
                except RecoveryError:
                    label = f"{label}/recovery-failed"
            else:
                stalls += 1
            tracker.record(iteration, "surface", rate, label, 1e3 * (time.perf_counter() - t0))
            if stalls >= 2:
                status = DEGRADED
                break

        if not opts.equal_power_split:
            t0 = time.perf_counter()
            ps = optimal_power_split(channels, state.star, state.beams, config)
            accepted = not np.any(ps.infeasible) and accept(SolutionState(state.beams, state.star, ps))
            tracker.record(iteration, "split", rate, "closed-form" if accepted else "kept",
                           1e3 * (time.perf_counter() - t0))

        trace.append(rate)
        if abs(rate - previous) / max(previous, 1e-12) <= opts.epsilon:
            status = CONVERGED
            break

    return SolveReport(
        status=status,
        solution=state,
        objective_trace=trace,
        iterations=iteration,
        stages=tracker.stages,
        feasibility=check_feasibility(channels, state, config, opts.feas_tol),
        rank_ratios=ratios,
        bounds=bounds,
        stage_ms=tracker.stage_ms,
        wall_ms=1e3 * (time.perf_counter() - start),
    )


def relaxation_bounds(channels, solution, config, opts=None, surface_mode=ES):
    """Relaxed optima (in nats) with weights made tight at ``solution``.

    Because ``solution`` is feasible for both lifted problems and the
    surrogates are tight there, each value is at least ln 2 times its sum
    rate.
    """
    opts = opts or AoOptions()
    joint = opts.joint_split and not opts.equal_power_split
    weights = update_auxiliary(channels, solution, config)
    out = {}
    r2 = solve_conic(build_p2(channels, solution.star, solution.ps, weights.S, config, joint_split=joint),
                     tol=opts.solver_tol, backend=opts.backend)
    if r2.ok:
        out["p2"] = r2.objective
    if surface_mode is not None:
        r3 = solve_conic(build_p3(channels, solution.beams, solution.ps, weights.q, config, mode=surface_mode,
                                  joint_split=joint),
                         tol=opts.solver_tol, backend=opts.backend)
        if r3.ok:
            out["p3"] = r3.objective
    return out
