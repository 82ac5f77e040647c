"""Scenario constants, geometry, path loss and seeded channel generation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def dbm_to_watts(value_dbm):
    return 10.0 ** (np.asarray(value_dbm, dtype=float) / 10.0) / 1000.0


def watts_to_dbm(value_w):
    return 10.0 * np.log10(np.asarray(value_w, dtype=float) * 1000.0)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario constants in linear units (watts, meters, linear gains).

    Defaults reproduce the downlink setup with K=4 users (2 per side),
    P_max = 42 dBm, sigma^2 = -70 dBm and delta^2 = -60 dBm. Use
    :meth:`from_db` to construct from dB/dBm quantities.
    """

    M: int = 4
    N: int = 16
    K_r: int = 2
    K_t: int = 2
    P_max: float = float(dbm_to_watts(42.0))
    sigma2: float = float(dbm_to_watts(-70.0))
    delta2: float = float(dbm_to_watts(-60.0))
    E_min: float = float(dbm_to_watts(-50.0))
    eta: float = 0.5
    C0_db: float = -30.0
    d0: float = 1.0
    alpha_bs_ris: float = 2.2
    alpha_ris_user: float = 2.0
    alpha_bs_user: float = 3.8
    rician_k_db: float = 3.0
    bs_pos: tuple = (0.0, 0.0, 2.0)
    ris_pos: tuple = (0.0, 15.0, 2.0)
    user_region_centers: tuple = ((-2.0, 15.0, 1.0), (2.0, 15.0, 1.0))
    user_region_radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def K(self):
        return self.K_r + self.K_t

    @property
    def gamma(self):
        """Inverse antenna-noise variance, 1/sigma^2."""
        return 1.0 / self.sigma2

    @property
    def P_max_dbm(self):
        return float(watts_to_dbm(self.P_max))

    @property
    def E_min_dbm(self):
        return float(watts_to_dbm(self.E_min)) if self.E_min > 0 else float("-inf")

    @property
    def rician_k(self):
        return float(db_to_linear(self.rician_k_db))

    @property
    def sides(self):
        return np.array(["r"] * self.K_r + ["t"] * self.K_t)

    @property
    def eta_vector(self):
        return np.broadcast_to(np.asarray(self.eta, dtype=float), (self.K,)).copy()

    def validate(self):
        checks = [
            ("M", self.M >= 1),
            ("N", self.N >= 1),
            ("K_r", self.K_r >= 1),
            ("K_t", self.K_t >= 1),
            ("P_max", self.P_max > 0),
            ("sigma2", self.sigma2 > 0),
            ("delta2", self.delta2 >= 0),
            ("E_min", self.E_min >= 0),
            ("d0", self.d0 > 0),
            ("user_region_radius", self.user_region_radius >= 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"invalid value for {name}: {getattr(self, name)!r}")
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim > 1 or (eta.ndim == 1 and eta.shape[0] != self.K):
            raise ValueError(f"invalid value for eta: expected scalar or {self.K} values")
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ValueError(f"invalid value for eta: {self.eta!r} not in (0, 1]")
        if len(self.user_region_centers) != 2:
            raise ValueError("user_region_centers must hold the r and t centers")

    @classmethod
    def from_db(cls, P_max_dbm=42.0, sigma2_dbm=-70.0, delta2_dbm=-60.0,
                E_min_dbm=-50.0, **kwargs):
        """Construct from dBm powers; ``E_min_dbm=None`` or ``-inf`` means no EH floor."""
        if E_min_dbm is None or np.isneginf(E_min_dbm):
            E_min = 0.0
        else:
            E_min = float(dbm_to_watts(E_min_dbm))
        return cls(P_max=float(dbm_to_watts(P_max_dbm)),
                   sigma2=float(dbm_to_watts(sigma2_dbm)),
                   delta2=float(dbm_to_watts(delta2_dbm)) if delta2_dbm is not None else 0.0,
                   E_min=E_min, **kwargs)

    def with_(self, **changes):
        return replace(self, **changes)


def config_field_names():
    return [f.name for f in fields(SystemConfig)]


@dataclass
class ChannelSet:
    """One channel realization.

    ``G`` is the N x M BS->surface matrix, ``h[k]`` the length-M BS->user
    vector and ``g[k]`` the length-N surface->user vector of user k. The
    effective channel of user k uses their Hermitian transposes. ``sides``
    tags users 0..K_r-1 as ``"r"`` and the rest as ``"t"``.
    """

    G: np.ndarray
    h: np.ndarray
    g: np.ndarray
    sides: np.ndarray
    positions: np.ndarray = field(default=None, repr=False)

    @property
    def M(self):
        return self.G.shape[1]

    @property
    def N(self):
        return self.G.shape[0]

    @property
    def K(self):
        return self.h.shape[0]

    @property
    def K_r(self):
        return int(np.sum(self.sides == "r"))

    def without_surface(self):
        """Copy with every surface->user path removed."""
        return replace(self, g=np.zeros_like(self.g))

    def tobytes(self):
        return b"".join(np.ascontiguousarray(a).tobytes() for a in (self.G, self.h, self.g))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def path_loss_amplitude(d, alpha, C0_db=-30.0, d0=1.0):
    """Amplitude gain sqrt(C0 (d/d0)^-alpha) of the distance path-loss law."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if d0 <= 0:
        raise ValueError("reference distance must be positive")
    out = np.sqrt(db_to_linear(C0_db) * (d / d0) ** (-alpha))
    return float(out) if out.ndim == 0 else out


def sample_channel(rows, cols, rician_k_linear, los_component="uniform-phase", rng=None):
    """Draw sqrt(k/(1+k)) H_los + sqrt(1/(1+k)) H_nlos with unit-power entries.

    ``los_component`` is either a unit-modulus ``rows x cols`` array or the
    string ``"uniform-phase"``, in which case the LoS phases are drawn from
    ``rng`` before the scattered part. ``rician_k_linear = 0`` gives Rayleigh
    fading and no LoS draw.
    """
    if rician_k_linear < 0:
        raise ValueError("Rician factor must be non-negative")
    rng = as_generator(rng)
    if rician_k_linear > 0:
        if isinstance(los_component, str):
            if los_component != "uniform-phase":
                raise ValueError(f"unknown LoS component {los_component!r}")
            los = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(rows, cols)))
        else:
            los = np.asarray(los_component, dtype=complex)
            if los.shape != (rows, cols):
                raise ValueError("LoS component shape mismatch")
    else:
        los = np.zeros((rows, cols), dtype=complex)
    nlos = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    k = float(rician_k_linear)
    if np.isinf(k):
        return los
    return np.sqrt(k / (1.0 + k)) * los + np.sqrt(1.0 / (1.0 + k)) * nlos


def _disk_points(center, radius, count, rng):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, size=count))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    pts = np.tile(np.asarray(center, dtype=float), (count, 1))
    pts[:, 0] += r * np.cos(phi)
    pts[:, 1] += r * np.sin(phi)
    return pts


def place_users(config, rng=None):
    """Uniform-in-area user positions: K_r around the r center, K_t around the t center."""
    rng = as_generator(rng)
    r_center, t_center = config.user_region_centers
    return np.vstack([
        _disk_points(r_center, config.user_region_radius, config.K_r, rng),
        _disk_points(t_center, config.user_region_radius, config.K_t, rng),
    ])


def build_channels(config, rng=None):
    """Draw one :class:`ChannelSet` for ``config``.

    The stream is split into four children in a fixed order: user
    positions, G, the direct channels h_1..h_K, then the surface channels
    g_1..g_K. Each channel family therefore depends only on its own child
    and on its own dimensions, so e.g. the direct links are identical for
    any element count N under the same seed.
    """
    if rng is None:
        rng = config.seed
    rng = as_generator(rng)
    pos_rng, G_rng, h_rng, g_rng = rng.spawn(4)
    positions = place_users(config, pos_rng)
    bs = np.asarray(config.bs_pos, dtype=float)
    ris = np.asarray(config.ris_pos, dtype=float)
    kappa = config.rician_k

    amp_G = path_loss_amplitude(np.linalg.norm(bs - ris), config.alpha_bs_ris, config.C0_db, config.d0)
    G = amp_G * sample_channel(config.N, config.M, kappa, rng=G_rng)

    d_bu = np.linalg.norm(positions - bs, axis=1)
    d_ru = np.linalg.norm(positions - ris, axis=1)
    h = np.vstack([
        path_loss_amplitude(d, config.alpha_bs_user, config.C0_db, config.d0)
        * sample_channel(1, config.M, 0.0, rng=h_rng)[0]
        for d in d_bu
    ])
    g = np.vstack([
        path_loss_amplitude(d, config.alpha_ris_user, config.C0_db, config.d0)
        * sample_channel(1, config.N, kappa, rng=g_rng)[0]
        for d in d_ru
    ])
    return ChannelSet(G=G, h=h, g=g, sides=config.sides, positions=positions)
