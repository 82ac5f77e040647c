"""Lifted convex subproblems for beamformers and surface coefficients.

Both subproblems replace each log-ratio rate by the tight concave surrogate

    ln(signal + interference + c) - w * (interference + c) + ln w + 1,

with ``c = 1 + delta^2 gamma / rho`` and the weight ``w`` fixed at
``1 / (interference + c)`` evaluated at the current iterate. This relies on
-ln x = max_{t>0} (-t x + ln t + 1), attained at t = 1/x. All gains inside
the problems are scaled by gamma = 1/sigma^2.

With ``joint_split=True`` the PS ratios become variables of either
subproblem. Per user a 2x2 block Y = [[y, 1], [1, rho]] >= 0 gives
y >= 1/rho, and the noise constant becomes c = 1 + delta^2 gamma y. Since
the rate falls as c grows, the surrogate stays a minorizer that is tight at
y = 1/rho. The EH floor (1 - rho) * received >= E_min / eta enters as
Z = [[received / e, 1], [1, 1 - rho]] >= 0. Without this, the closed-form
ratios leave every EH constraint tight, so the fixed-ratio subproblems can
only keep each user's received power at its current value. Block ascent
then tends to stall at the starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import Affine, ConicProblem
from .model import effective_channels, gain_matrix, stacked_channel

ES = "es"
EQUAL_AMPLITUDE = "equal_amplitude"
REFLECT_ONLY = "reflect_only"
SURFACE_MODES = (ES, EQUAL_AMPLITUDE, REFLECT_ONLY)


@dataclass
class AuxiliaryWeights:
    S: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        if np.any(self.S <= 0) or np.any(self.q <= 0):
            raise FloatingPointError("auxiliary weights must be strictly positive")


@dataclass
class LiftedBeamformers:
    F: list

    def check(self, tol=1e-7):
        for F in self.F:
            scale = max(np.abs(F).max(), 1.0)
            if np.abs(F - F.conj().T).max() > tol * scale:
                return False
            if np.linalg.eigvalsh(0.5 * (F + F.conj().T)).min() < -tol * scale:
                return False
        return True


@dataclass
class LiftedStarMatrices:
    V_r: np.ndarray
    V_t: np.ndarray = None

    def coupling_error(self):
        if self.V_t is None:
            return float(np.abs(np.real(np.diag(self.V_r))[1:] - 1.0).max(initial=0.0))
        s = np.real(np.diag(self.V_r))[1:] + np.real(np.diag(self.V_t))[1:]
        return float(np.abs(s - 1.0).max(initial=0.0))


def noise_constants(ps, config, paper_literal=False):
    """c_k = 1 + delta^2 gamma / rho_k; ``inf`` where rho_k = 0 and delta^2 > 0."""
    rho = np.asarray(ps.rho, dtype=float)
    dg = config.delta2 * config.gamma
    with np.errstate(divide="ignore"):
        proc = np.where(rho > 0, dg / np.where(rho > 0, rho, 1.0), np.inf) if dg > 0 else np.zeros_like(rho)
    if paper_literal:
        # (delta^2 gamma + 1) / rho + 1, as printed for the closed-form weight
        with np.errstate(divide="ignore"):
            return np.where(rho > 0, (dg + 1.0) / np.where(rho > 0, rho, 1.0), np.inf) + 1.0
    return 1.0 + proc


def channel_grams(channels, star):
    """H_k = a_k^H a_k for every user, shape (K, M, M)."""
    A = effective_channels(channels, star)
    return np.einsum("ki,kj->kij", np.conj(A), A)


def d_matrices(channels, beams):
    """D_k (all beams) and Dbar_k (interfering beams only), shape (K, N+1, N+1)."""
    f = beams.f
    Q = f.T @ np.conj(f)  # sum_j f_j f_j^H
    D, Dbar = [], []
    for k in range(channels.K):
        B = stacked_channel(channels, k)
        others = np.delete(f, k, axis=0)
        Qbar = others.T @ np.conj(others)
        D.append(B @ Q @ B.conj().T)
        Dbar.append(B @ Qbar @ B.conj().T)
    return np.array(D), np.array(Dbar)


def surface_lift(star):
    """Rank-1 lifts V_d = vbar vbar^H with vbar = [1, u_d]."""
    vr = np.concatenate([[1.0], star.vector("r")])
    vt = np.concatenate([[1.0], star.vector("t")])
    return LiftedStarMatrices(np.outer(vr, np.conj(vr)), np.outer(vt, np.conj(vt)))


def interference_terms(channels, solution, config, lifted=None):
    """gamma * interference power per user, from beams or from lifted matrices."""
    gamma = config.gamma
    if lifted is None:
        W = gain_matrix(effective_channels(channels, solution.star), solution.beams.f)
        return gamma * (W.sum(axis=1) - np.diag(W))
    if isinstance(lifted, LiftedBeamformers):
        H = channel_grams(channels, solution.star)
        total = sum(lifted.F)
        return np.array([gamma * np.real(np.trace(H[k] @ (total - lifted.F[k]))) for k in range(channels.K)])
    if isinstance(lifted, LiftedStarMatrices):
        _, Dbar = d_matrices(channels, solution.beams)
        out = []
        for k in range(channels.K):
            V = lifted.V_r if channels.sides[k] == "r" or lifted.V_t is None else lifted.V_t
            out.append(gamma * np.real(np.trace(Dbar[k] @ V)))
        return np.array(out)
    raise TypeError(f"unsupported lifted value {type(lifted).__name__}")


def update_auxiliary(channels, solution, config, lifted=None, paper_literal=False):
    """Closed-form surrogate weights at the current iterate.

    S_k = q_k = 1 / (gamma * interference_k + 1 + delta^2 gamma / rho_k).
    Passing ``lifted`` evaluates the interference from relaxed matrices. A
    user with rho_k = 0 and delta^2 > 0 gets weight 1 (it carries no rate
    term in either subproblem).
    """
    x = interference_terms(channels, solution, config, lifted)
    c = noise_constants(solution.ps, config, paper_literal)
    denom = x + c
    if np.any(denom <= 0):
        raise FloatingPointError("non-positive surrogate denominator")
    w = np.where(np.isfinite(denom), 1.0 / np.where(np.isfinite(denom), denom, 1.0), 1.0)
    return AuxiliaryWeights(S=w.copy(), q=w.copy())


def _eh_scale(config):
    return config.gamma * config.E_min if config.E_min > 0 else 1.0


_E00 = np.array([[1.0, 0.0], [0.0, 0.0]])
_E11 = np.array([[0.0, 0.0], [0.0, 1.0]])
_RE01 = np.array([[0.0, 0.5], [0.5, 0.0]])


def _split_blocks(prob, k, received, eta_k, config):
    """Add the joint PS blocks of user k; returns the noise-constant Affine.

    ``received`` is the Affine gamma * (received power + sigma^2).
    """
    Y = prob.add_variable(f"Y{k}", 2)
    prob.add_constraint(Affine(-1.0).add(Y, _RE01), "==")
    e = config.gamma * config.E_min / eta_k
    if e > 0:
        Z = prob.add_variable(f"Z{k}", 2)
        prob.add_constraint(Affine(-1.0).add(Z, _RE01), "==")
        prob.add_constraint(Affine(-1.0).add(Z, _E11).add(Y, _E11), "==")
        link = received.scaled(1.0 / e)
        prob.add_constraint(link.add(Z, _E00, -1.0), "==")
    else:
        prob.add_constraint(Affine(1.0).add(Y, _E11, -1.0), ">=")
    return Affine(1.0).add(Y, _E00, config.delta2 * config.gamma)


def split_values(ps, received, config):
    """Values of the joint PS blocks at ratios ``ps.rho``.

    ``received`` is gamma * (received power + sigma^2) per user. The order
    matches the variables added by the builders.
    """
    out = []
    for k, rho in enumerate(np.asarray(ps.rho, dtype=float)):
        y = 1.0 / rho if rho > 0 else 0.0
        out.append(np.array([[y, 1.0], [1.0, rho]], dtype=complex))
        e = config.gamma * config.E_min / config.eta_vector[k]
        if e > 0:
            out.append(np.array([[received[k] / e, 1.0], [1.0, 1.0 - rho]], dtype=complex))
    return out


def relaxed_split(result, first, config):
    """PS ratios read from the Y blocks of a joint-split solution.

    ``first`` is the index of the first split variable (the number of
    beamformer or surface matrices).
    """
    stride = 2 if config.E_min > 0 else 1
    blocks = result.values[first::stride]
    return np.array([float(np.clip(np.real(Y[1, 1]), 0.0, 1.0)) for Y in blocks])


def build_p2(channels, star, ps, S, config, joint_split=False):
    """Lifted beamformer problem for fixed surface coefficients and PS ratios.

    ``S`` is a length-K weight array (or :class:`AuxiliaryWeights`). Users
    with no information branch (infinite noise constant) carry no objective
    terms but keep their EH constraint. Variables: F_0..F_{K-1}, then with
    ``joint_split`` the per-user Y (and Z) blocks.
    """
    if isinstance(S, AuxiliaryWeights):
        S = S.S
    S = np.asarray(S, dtype=float)
    K, M = channels.K, channels.M
    gamma = config.gamma
    H = gamma * channel_grams(channels, star)
    c = noise_constants(ps, config)
    eta = config.eta_vector
    rho = np.asarray(ps.rho, dtype=float)

    prob = ConicProblem()
    F = [prob.add_variable(f"F{k}", M) for k in range(K)]
    noise = [Affine(c[k]) for k in range(K)]
    if joint_split:
        for k in range(K):
            received = Affine(1.0)
            for j in range(K):
                received.add(F[j], H[k])
            noise[k] = _split_blocks(prob, k, received, eta[k], config)
    linear = Affine()
    for k in range(K):
        if np.isfinite(c[k]):
            log_arg = noise[k].scaled(1.0)
            for j in range(K):
                log_arg.add(F[j], H[k])
            prob.log_terms.append(log_arg)
            linear = linear.plus(noise[k].scaled(-S[k]))
            linear.const += np.log(S[k]) + 1.0
            for j in range(K):
                if j != k:
                    linear.add(F[j], H[k], -S[k])
    prob.linear = linear

    eh_scale = _eh_scale(config)
    for k in range(K if not joint_split else 0):
        a = eta[k] * (1.0 - rho[k])
        expr = Affine((a - gamma * config.E_min) / eh_scale)
        for j in range(K):
            expr.add(F[j], H[k], a / eh_scale)
        prob.add_constraint(expr, ">=")

    power = Affine(1.0)
    for j in range(K):
        power.add(F[j], np.eye(M), -1.0 / config.P_max)
    prob.add_constraint(power, ">=")
    return prob


def build_p3(channels, beams, ps, q, config, mode=ES, first_diag=1.0, joint_split=False):
    """Lifted surface problem for fixed beamformers and PS ratios.

    ``mode`` selects the amplitude structure: ``es`` couples the diagonals
    of V_r and V_t to sum to 1, ``equal_amplitude`` pins every diagonal at
    1/2 and ``reflect_only`` keeps only V_r with unit diagonal (users on the
    transmission side then see no surface and are left out). ``first_diag``
    is the value of V_d[0, 0]. With ``joint_split`` the Y (and Z) blocks of
    the participating users follow the surface matrices.
    """
    if mode not in SURFACE_MODES:
        raise ValueError(f"unknown surface mode {mode!r}")
    if isinstance(q, AuxiliaryWeights):
        q = q.q
    q = np.asarray(q, dtype=float)
    K, N = channels.K, channels.N
    gamma = config.gamma
    D, Dbar = d_matrices(channels, beams)
    D, Dbar = gamma * D, gamma * Dbar
    c = noise_constants(ps, config)
    eta = config.eta_vector
    rho = np.asarray(ps.rho, dtype=float)

    prob = ConicProblem()
    var = {"r": prob.add_variable("V_r", N + 1)}
    if mode != REFLECT_ONLY:
        var["t"] = prob.add_variable("V_t", N + 1)
    users = [k for k in range(K) if channels.sides[k] in var]
    noise = {k: Affine(c[k]) for k in users}
    if joint_split:
        for k in users:
            received = Affine(1.0).add(var[channels.sides[k]], D[k])
            noise[k] = _split_blocks(prob, k, received, eta[k], config)

    linear = Affine()
    for k in users:
        v = var[channels.sides[k]]
        if np.isfinite(c[k]):
            prob.log_terms.append(noise[k].scaled(1.0).add(v, D[k]))
            linear = linear.plus(noise[k].scaled(-q[k]))
            linear.const += np.log(q[k]) + 1.0
            linear.add(v, Dbar[k], -q[k])
    prob.linear = linear

    eh_scale = _eh_scale(config)
    for k in (users if not joint_split else ()):
        v = var[channels.sides[k]]
        a = eta[k] * (1.0 - rho[k])
        prob.add_constraint(Affine((a - gamma * config.E_min) / eh_scale).add(v, D[k], a / eh_scale), ">=")

    def unit(n):
        E = np.zeros((N + 1, N + 1))
        E[n, n] = 1.0
        return E

    for n in range(1, N + 1):
        if mode == ES:
            prob.add_constraint(Affine(-1.0).add(var["r"], unit(n)).add(var["t"], unit(n)), "==")
        elif mode == EQUAL_AMPLITUDE:
            for v in var.values():
                prob.add_constraint(Affine(-0.5).add(v, unit(n)), "==")
        else:
            prob.add_constraint(Affine(-1.0).add(var["r"], unit(n)), "==")
    for v in var.values():
        prob.add_constraint(Affine(-first_diag).add(v, unit(0)), "==")
    return prob


def lifted_from_result(result, mode=ES):
    if mode == REFLECT_ONLY:
        return LiftedStarMatrices(result.values[0], None)
    return LiftedStarMatrices(result.values[0], result.values[1])


def _received(channels, solution, config):
    W = gain_matrix(effective_channels(channels, solution.star), solution.beams.f)
    return config.gamma * (W.sum(axis=1) + config.sigma2)


def p2_surrogate(channels, solution, config, S=None, joint_split=False):
    """Surrogate objective of the beamformer problem at the rank-1 point of ``solution``."""
    if S is None:
        S = update_auxiliary(channels, solution, config)
    prob = build_p2(channels, solution.star, solution.ps, S, config, joint_split=joint_split)
    values = [np.outer(f, np.conj(f)) for f in solution.beams.f]
    if joint_split:
        values += split_values(solution.ps, _received(channels, solution, config), config)
    return prob.objective_value(values)


def p3_surrogate(channels, solution, config, q=None, mode=ES, joint_split=False):
    if q is None:
        q = update_auxiliary(channels, solution, config)
    prob = build_p3(channels, solution.beams, solution.ps, q, config, mode=mode, joint_split=joint_split)
    lift = surface_lift(solution.star)
    values = [lift.V_r] if mode == REFLECT_ONLY else [lift.V_r, lift.V_t]
    if joint_split:
        users = [k for k in range(channels.K) if mode != REFLECT_ONLY or channels.sides[k] == "r"]
        ps = type(solution.ps)(solution.ps.rho[users])
        received = _received(channels, solution, config)[users]
        values += split_values(ps, received, config)
    return prob.objective_value(values)
