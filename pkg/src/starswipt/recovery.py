"""Mapping relaxed solutions back to physical decision variables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import BeamformerSet, PowerSplit, StarCoefficients, effective_channels, gain_matrix
from .scenario import as_generator
from .sdr import EQUAL_AMPLITUDE, ES, REFLECT_ONLY

# a beam carrying less than this share of the relaxed power is treated as switched off
OFF_BEAM_SHARE = 1e-6


class RecoveryError(RuntimeError):
    """No randomization candidate met the EH floors; ``best`` holds the least-violating one."""

    def __init__(self, message, best=None, violation=None):
        super().__init__(message)
        self.best = best
        self.violation = violation


@dataclass
class RandomizationOptions:
    trials: int = 50
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    tol: float = 1e-6
    rank_tol: float = 1e-3

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("randomization needs at least one trial")
        self.rng = as_generator(self.rng)


def hermitian_eig(X):
    """Eigenpairs of the Hermitian part of ``X``, eigenvalues descending."""
    X = 0.5 * (X + X.conj().T)
    w, U = np.linalg.eigh(X)
    return w[::-1], U[:, ::-1]


def rank_ratios(F):
    """lambda_2 / lambda_1 per lifted beam; zero for switched-off beams."""
    total = sum(float(np.real(np.trace(Fk))) for Fk in F)
    out = []
    for Fk in F:
        w, _ = hermitian_eig(Fk)
        if w[0] <= OFF_BEAM_SHARE * max(total, np.finfo(float).tiny) or w.size == 1:
            out.append(0.0)
        else:
            out.append(float(max(w[1], 0.0) / w[0]))
    return np.array(out)


def _gaussian_factor(X):
    w, U = hermitian_eig(X)
    return U * np.sqrt(np.clip(w, 0.0, None))


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _rates_and_energy(A, f, rho, config):
    """Batched rates and harvested energy for candidate beams/channels.

    ``A`` has shape (T, K, M) or (K, M), ``f`` shape (T, K, M) or (K, M).
    ``rho=None`` gives every candidate its own closed-form PS ratios.
    """
    W = np.abs(np.einsum("...km,...jm->...kj", A, f)) ** 2
    signal = np.diagonal(W, axis1=-2, axis2=-1)
    received = W.sum(axis=-1)
    if rho is None:
        rho = np.clip(1.0 - config.E_min / (config.eta_vector * (received + config.sigma2)), 0.0, 1.0)
    rho = np.asarray(rho, dtype=float)
    if config.delta2 > 0:
        proc = np.where(rho > 0, config.delta2 / np.where(rho > 0, rho, 1.0), np.inf)
    else:
        proc = 0.0
    sinr = signal / (received - signal + config.sigma2 + proc)
    rates = np.log2(1.0 + sinr).sum(axis=-1)
    energy = config.eta_vector * (1.0 - rho) * (received + config.sigma2)
    return rates, energy


def _select(rates, energy, config, tol):
    """Index of the best EH-feasible candidate (lowest index on ties) or None."""
    if config.E_min > 0:
        shortfall = np.max(1.0 - energy / config.E_min, axis=-1)
    else:
        shortfall = np.zeros(rates.shape)
    feasible = shortfall <= tol
    if not np.any(feasible):
        return None, int(np.argmin(shortfall)), shortfall
    masked = np.where(feasible, rates, -np.inf)
    return int(np.argmax(masked)), None, shortfall


def beam_candidates(F, P_max, opts, principal=None):
    """Principal candidate plus ``opts.trials`` draws from CN(0, F_k).

    Returns shape (T + 1, K, M); every candidate is rescaled to the relaxed
    total power capped at ``P_max``.
    """
    F = [np.asarray(Fk, dtype=complex) for Fk in F]
    if principal is None:
        principal = []
        for Fk in F:
            w, U = hermitian_eig(Fk)
            principal.append(np.sqrt(max(w[0], 0.0)) * U[:, 0])
        principal = np.array(principal)
    relaxed_power = min(sum(float(np.real(np.trace(Fk))) for Fk in F), P_max)
    K, M = principal.shape
    factors = np.array([_gaussian_factor(Fk) for Fk in F])
    draws = _complex_normal(opts.rng, (opts.trials, K, M))
    gaussian = np.einsum("kmn,tkn->tkm", factors, draws)
    candidates = np.concatenate([principal[None], gaussian], axis=0)
    power = np.sum(np.abs(candidates) ** 2, axis=(1, 2))
    scale = np.sqrt(relaxed_power / np.where(power > 0, power, 1.0))
    return candidates * scale[:, None, None]


def recover_beamformers(F, channels, star, ps, config, opts=None):
    """Beamformers from lifted solutions ``F`` (list of K Hermitian M x M).

    Every F_k with lambda_2/lambda_1 <= ``rank_tol`` yields
    f_k = sqrt(lambda_1) u_1 directly. Otherwise the principal candidate and
    ``trials`` Gaussian draws f_k ~ CN(0, F_k) are rescaled jointly to the
    relaxed power (capped at P_max) and the EH-feasible one with the best
    sum rate is returned. With ``ps=None`` candidates are scored with
    their own closed-form PS ratios.
    """
    opts = opts or RandomizationOptions()
    F = [np.asarray(Fk, dtype=complex) for Fk in F]
    principal = []
    for Fk in F:
        w, U = hermitian_eig(Fk)
        principal.append(np.sqrt(max(w[0], 0.0)) * U[:, 0])
    principal = np.array(principal)

    if np.all(rank_ratios(F) <= opts.rank_tol):
        return BeamformerSet(_cap_power(principal, config.P_max))

    candidates = beam_candidates(F, config.P_max, opts, principal)

    A = effective_channels(channels, star)
    rates, energy = _rates_and_energy(A[None], candidates, None if ps is None else ps.rho, config)
    best, least_bad, shortfall = _select(rates, energy, config, opts.tol)
    if best is None:
        raise RecoveryError("no EH-feasible beamformer candidate",
                            best=BeamformerSet(candidates[least_bad]),
                            violation=float(shortfall[least_bad]))
    return BeamformerSet(_cap_power(candidates[best], config.P_max))


def _cap_power(f, P_max):
    power = float(np.sum(np.abs(f) ** 2))
    if power > P_max:
        f = f * np.sqrt(P_max / power)
    return f


def _normalized_candidates(V, draws):
    """Principal plus Gaussian candidates of vbar, scaled so vbar[0] = 1."""
    w, U = hermitian_eig(V)
    principal = np.sqrt(max(w[0], 0.0)) * U[:, 0]
    factor = U * np.sqrt(np.clip(w, 0.0, None))
    cands = np.vstack([principal[None], draws @ factor.T])
    lead = cands[:, :1]
    lead = np.where(np.abs(lead) > 0, lead, 1.0)
    return (cands / lead)[:, 1:]


def project_amplitudes(beta_r, beta_t):
    """Scale (beta_r, beta_t) per element onto beta_r + beta_t = 1."""
    s = beta_r + beta_t
    br = np.where(s > 0, beta_r / np.where(s > 0, s, 1.0), 0.5)
    # complement rather than a second division keeps the sum at 1 to rounding
    return br, 1.0 - br


def recover_star_coefficients(lifted, channels, beams, ps, config, opts=None, mode=ES,
                              reference=None, phase_only=False):
    """Surface coefficients from lifted matrices by Gaussian randomization.

    Candidate 0 is the principal eigenvector of each V_d, candidates 1..T
    are draws from CN(0, V_d) built from one shared standard draw per pair; each is normalized to a
    unit first entry. Amplitudes follow from the squared magnitudes
    projected onto the coupling constraint (or are pinned by ``mode``),
    phases from the arguments. ``reference`` supplies values that the mode
    freezes (the transmission phases for ``reflect_only``). With
    ``phase_only`` the magnitudes are discarded before projection.
    """
    opts = opts or RandomizationOptions()
    T = opts.trials
    # one standard draw per pair feeds both sides, so V_r = V_t yields equal candidates
    draws = _complex_normal(opts.rng, (T, lifted.V_r.shape[0]))
    v_r = _normalized_candidates(lifted.V_r, draws)
    if mode == REFLECT_ONLY:
        theta_t = reference.theta_t if reference is not None else np.full(v_r.shape[1], 2 * np.pi)
        v_t = np.zeros_like(v_r)
    else:
        v_t = _normalized_candidates(lifted.V_t, draws)

    theta_r = np.angle(v_r)
    if mode == ES:
        if phase_only:
            mag_r, mag_t = np.ones(v_r.shape), np.ones(v_t.shape)
        else:
            mag_r, mag_t = np.abs(v_r) ** 2, np.abs(v_t) ** 2
        beta_r, beta_t = project_amplitudes(mag_r, mag_t)
        theta_t = np.angle(v_t)
    elif mode == EQUAL_AMPLITUDE:
        beta_r = np.full(v_r.shape, 0.5)
        beta_t = np.full(v_r.shape, 0.5)
        theta_t = np.angle(v_t)
    else:
        beta_r = np.ones(v_r.shape)
        beta_t = np.zeros(v_r.shape)
        theta_t = np.broadcast_to(theta_t, v_r.shape)

    u_r = np.sqrt(beta_r) * np.exp(1j * theta_r)
    u_t = np.sqrt(beta_t) * np.exp(1j * theta_t)
    is_r = channels.sides == "r"
    u = np.where(is_r[None, :, None], u_r[:, None, :], u_t[:, None, :])  # (T+1, K, N)
    A = np.conj(channels.h)[None] + np.einsum("kn,tkn,nm->tkm", np.conj(channels.g), np.conj(u), channels.G)
    rates, energy = _rates_and_energy(A, beams.f[None], None if ps is None else ps.rho, config)
    best, least_bad, shortfall = _select(rates, energy, config, opts.tol)

    def star_at(i):
        return StarCoefficients(beta_r[i].copy(), beta_t[i].copy(), theta_r[i].copy(), np.array(theta_t[i]))

    if best is None:
        raise RecoveryError("no EH-feasible surface candidate", best=star_at(least_bad),
                            violation=float(shortfall[least_bad]))
    return star_at(best)


def optimal_power_split(channels, star, beams, config):
    """Largest PS ratio meeting each EH floor, clipped to [0, 1].

    Users whose floor is unreachable even at rho = 0 are flagged in
    ``PowerSplit.infeasible``.
    """
    W = gain_matrix(effective_channels(channels, star), beams.f)
    available = config.eta_vector * (W.sum(axis=1) + config.sigma2)
    raw = 1.0 - config.E_min / available
    return PowerSplit(np.clip(raw, 0.0, 1.0), infeasible=raw < 0.0)
