"""Decision variables and the physical quantities they induce.

Convention: a surface with amplitudes ``beta`` and phases ``theta`` acts on
the cascaded path with diagonal entries ``sqrt(beta) * exp(-1j * theta)``, so
the effective channel row of user k on side d is

    a_k = h_k^H + g_k^H diag(conj(u_d)) G,   u_d = sqrt(beta_d) exp(1j theta_d).

Equivalently ``a_k = [1, u_d^H] @ B_k`` with ``B_k = [h_k^H; diag(g_k^H) G]``,
which is the form the lifted surface problem works with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def normalize_phase(theta):
    """Map phases into (0, 2*pi]."""
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    return np.where(theta <= 0.0, TWO_PI, theta)


@dataclass
class StarCoefficients:
    beta_r: np.ndarray
    beta_t: np.ndarray
    theta_r: np.ndarray
    theta_t: np.ndarray

    def __post_init__(self):
        self.beta_r = np.asarray(self.beta_r, dtype=float)
        self.beta_t = np.asarray(self.beta_t, dtype=float)
        self.theta_r = normalize_phase(self.theta_r)
        self.theta_t = normalize_phase(self.theta_t)

    @property
    def N(self):
        return self.beta_r.shape[0]

    @classmethod
    def from_vectors(cls, u_r, u_t):
        """Build from the complex vectors u_d = sqrt(beta_d) exp(j theta_d)."""
        return cls(np.abs(u_r) ** 2, np.abs(u_t) ** 2, np.angle(u_r), np.angle(u_t))

    @classmethod
    def equal_split(cls, theta_r, theta_t):
        n = len(theta_r)
        return cls(np.full(n, 0.5), np.full(n, 0.5), theta_r, theta_t)

    def vector(self, side):
        """u_d for ``side`` in {"r", "t"}."""
        if side == "r":
            return np.sqrt(self.beta_r) * np.exp(1j * self.theta_r)
        if side == "t":
            return np.sqrt(self.beta_t) * np.exp(1j * self.theta_t)
        raise ValueError(f"unknown side {side!r}")

    def phi(self, side):
        """Diagonal of the coefficient matrix Phi_d applied to the cascaded path."""
        return np.conj(self.vector(side))

    def copy(self):
        return StarCoefficients(self.beta_r.copy(), self.beta_t.copy(),
                                self.theta_r.copy(), self.theta_t.copy())


@dataclass
class BeamformerSet:
    """Row k of ``f`` is the beamformer f_k (units sqrt(W))."""

    f: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=complex)

    @property
    def power(self):
        return float(np.sum(np.abs(self.f) ** 2))

    def copy(self):
        return BeamformerSet(self.f.copy())


@dataclass
class PowerSplit:
    """Fraction rho_k of received power sent to information decoding."""

    rho: np.ndarray
    infeasible: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.infeasible is None:
            self.infeasible = np.zeros(self.rho.shape, dtype=bool)

    def copy(self):
        return PowerSplit(self.rho.copy(), self.infeasible.copy())


@dataclass
class SolutionState:
    beams: BeamformerSet
    star: StarCoefficients
    ps: PowerSplit

    def copy(self):
        return SolutionState(self.beams.copy(), self.star.copy(), self.ps.copy())


@dataclass
class FeasibilityReport:
    power_ok: bool
    eh_ok: np.ndarray
    coupling_ok: bool
    bounds_ok: bool
    worst_violation: float

    @property
    def feasible(self):
        return bool(self.power_ok and np.all(self.eh_ok) and self.coupling_ok and self.bounds_ok)


def stacked_channel(channels, k):
    """B_k = [h_k^H; diag(g_k^H) G], shape (N+1, M)."""
    return np.vstack([np.conj(channels.h[k])[None, :], np.conj(channels.g[k])[:, None] * channels.G])


def effective_channels(channels, star):
    """All effective channel rows, shape (K, M)."""
    phi = np.where(channels.sides[:, None] == "r", star.phi("r")[None, :], star.phi("t")[None, :])
    return np.conj(channels.h) + (np.conj(channels.g) * phi) @ channels.G


def effective_channel(channels, star, user_k):
    if channels.G.shape[0] != star.N or channels.g.shape[1] != star.N:
        raise ValueError("surface dimension mismatch between channels and coefficients")
    side = channels.sides[user_k]
    return np.conj(channels.h[user_k]) + (np.conj(channels.g[user_k]) * star.phi(side)) @ channels.G


def gain_matrix(A, f):
    """W[k, j] = |a_k f_j|^2 for effective rows ``A`` and beamformer rows ``f``."""
    return np.abs(A @ f.T) ** 2


def sinr_from_gains(W, rho, sigma2, delta2):
    """SINR_k = W_kk / (sum_{j!=k} W_kj + sigma^2 + delta^2/rho_k).

    Multiplying through by gamma = 1/sigma^2 gives the
    gamma W_kk / (gamma I_k + 1 + delta^2 gamma / rho_k) form.
    """
    W = np.asarray(W)
    rho = np.asarray(rho, dtype=float)
    signal = np.diagonal(W, axis1=-2, axis2=-1)
    interference = W.sum(axis=-1) - signal
    if delta2 > 0:
        # rho = 0 leaves only processing noise: SINR -> 0
        proc = np.where(rho > 0, delta2 / np.where(rho > 0, rho, 1.0), np.inf)
    else:
        proc = 0.0
    return signal / (interference + sigma2 + proc)


def rates_from_gains(W, rho, sigma2, delta2):
    return np.log2(1.0 + sinr_from_gains(W, rho, sigma2, delta2))


def energy_from_gains(W, rho, eta, sigma2):
    return np.asarray(eta) * (1.0 - np.asarray(rho)) * (np.asarray(W).sum(axis=-1) + sigma2)


def user_gains(channels, solution):
    return gain_matrix(effective_channels(channels, solution.star), solution.beams.f)


def sinr_and_rate(channels, solution, user_k, config):
    """(SINR, rate in bits/s/Hz) of one user."""
    W = user_gains(channels, solution)
    sinr = sinr_from_gains(W, solution.ps.rho, config.sigma2, config.delta2)[user_k]
    return float(sinr), float(np.log2(1.0 + sinr))


def user_rates(channels, solution, config):
    W = user_gains(channels, solution)
    return rates_from_gains(W, solution.ps.rho, config.sigma2, config.delta2)


def sum_rate(channels, solution, config):
    return float(np.sum(user_rates(channels, solution, config)))


def harvested_energy(channels, solution, user_k, config):
    W = user_gains(channels, solution)
    return float(energy_from_gains(W, solution.ps.rho, config.eta_vector, config.sigma2)[user_k])


def harvested_energies(channels, solution, config):
    W = user_gains(channels, solution)
    return energy_from_gains(W, solution.ps.rho, config.eta_vector, config.sigma2)


def check_feasibility(channels, solution, config, tol=1e-6):
    """Check the power budget, EH floors, amplitude coupling and variable bounds."""
    violations = [0.0]

    power = solution.beams.power
    power_excess = power / config.P_max - 1.0
    violations.append(max(power_excess, 0.0))
    power_ok = power <= config.P_max * (1.0 + tol)

    energy = harvested_energies(channels, solution, config)
    if config.E_min > 0:
        shortfall = 1.0 - energy / config.E_min
        violations.append(float(max(shortfall.max(), 0.0)))
        eh_ok = energy >= config.E_min * (1.0 - tol)
    else:
        eh_ok = np.ones(channels.K, dtype=bool)

    star = solution.star
    coupling_err = np.abs(star.beta_r + star.beta_t - 1.0)
    violations.append(float(coupling_err.max(initial=0.0)))
    coupling_ok = bool(np.all(coupling_err <= tol))

    rho = solution.ps.rho
    out_of_bounds = [
        np.maximum(-star.beta_r, 0), np.maximum(star.beta_r - 1, 0),
        np.maximum(-star.beta_t, 0), np.maximum(star.beta_t - 1, 0),
        np.maximum(-rho, 0), np.maximum(rho - 1, 0),
    ]
    bound_err = max(float(np.max(v, initial=0.0)) for v in out_of_bounds)
    violations.append(bound_err)
    bounds_ok = bound_err <= tol

    return FeasibilityReport(
        power_ok=bool(power_ok),
        eh_ok=np.asarray(eh_ok, dtype=bool),
        coupling_ok=coupling_ok,
        bounds_ok=bool(bounds_ok),
        worst_violation=float(max(violations)),
    )
