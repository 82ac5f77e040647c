"""Flat ``key = value`` configuration files.

Powers are given in dBm and gains in dB at the file boundary and converted
once to watts / linear units. Missing keys take the default scenario values;
unknown keys are an error. Example::

    # scenario
    m = 4
    n = 16
    k = 4
    k_r = 2
    p_max_dbm = 42
    e_min_dbm = -50
    # solver
    epsilon = 1e-3
"""

from __future__ import annotations

import json
import math

from .ao import AoOptions
from .scenario import SystemConfig, dbm_to_watts

SYSTEM_KEYS = {
    "m": "M", "n": "N", "k": None, "k_r": "K_r", "k_t": "K_t",
    "p_max_dbm": "P_max", "sigma2_dbm": "sigma2", "delta2_dbm": "delta2", "e_min_dbm": "E_min",
    "eta": "eta", "c0_db": "C0_db", "d0": "d0",
    "alpha_bs_ris": "alpha_bs_ris", "alpha_ris_user": "alpha_ris_user", "alpha_bs_user": "alpha_bs_user",
    "rician_k_db": "rician_k_db", "bs_pos": "bs_pos", "ris_pos": "ris_pos",
    "r_center": None, "t_center": None, "user_region_radius": "user_region_radius", "seed": "seed",
}
AO_KEYS = {
    "epsilon": "epsilon", "max_outer": "max_outer", "randomization_trials": "trials",
    "rank_tol": "rank_tol", "feas_tol": "feas_tol", "solver_tol": "solver_tol",
    "solver_max_iter": "solver_max_iter", "backend": "backend",
    "paper_literal_aux": "paper_literal_aux", "phase_only_recovery": "phase_only_recovery",
    "first_diag_half": "first_diag_half", "equal_power_split": "equal_power_split",
    "joint_split": "joint_split", "verbose": "verbose",
}
INT_KEYS = {"m", "n", "k", "k_r", "k_t", "seed", "max_outer", "randomization_trials", "solver_max_iter"}
BOOL_KEYS = {"paper_literal_aux", "phase_only_recovery", "first_diag_half", "equal_power_split",
             "joint_split", "verbose"}
VECTOR_KEYS = {"bs_pos": 3, "ris_pos": 3, "r_center": 3, "t_center": 3}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_value(text):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("-inf", "none"):
        return None if lowered == "none" else -math.inf
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if text.startswith("[") and text.endswith("]"):
        return [parse_value(item) for item in text[1:-1].split(",") if item.strip()]
    return text.strip("\"'")


def read_pairs(path):
    """Ordered ``{key: value}`` from a flat file; duplicate keys are an error."""
    pairs = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lower()
            if key in pairs:
                raise ConfigError(key, "duplicate key")
            pairs[key] = parse_value(value)
    return pairs


def _number(key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer:
        if float(value) != int(value):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def configs_from_pairs(pairs):
    """Split parsed pairs into (SystemConfig, AoOptions); leftovers are an error."""
    system, ao = {}, {}
    unknown = [k for k in pairs if k not in SYSTEM_KEYS and k not in AO_KEYS]
    if unknown:
        raise ConfigError(unknown[0], "unknown key")

    for key, value in pairs.items():
        if key in BOOL_KEYS:
            if not isinstance(value, bool):
                raise ConfigError(key, f"expected true/false, got {value!r}")
        elif key in VECTOR_KEYS:
            if not (isinstance(value, list) and len(value) == VECTOR_KEYS[key]):
                raise ConfigError(key, f"expected a list of {VECTOR_KEYS[key]} numbers")
            value = tuple(_number(key, v) for v in value)
        elif key == "backend":
            value = str(value)
        elif key == "e_min_dbm" and (value is None or value == -math.inf):
            value = None
        elif key == "eta" and isinstance(value, list):
            value = tuple(_number(key, v) for v in value)
        else:
            value = _number(key, value, integer=key in INT_KEYS)
        if key in AO_KEYS:
            ao[AO_KEYS[key]] = value
        else:
            system[key] = value

    k = system.pop("k", None)
    k_r = system.get("k_r", 2)
    if k is not None:
        if k < 2:
            raise ConfigError("k", f"need at least one user per side, got k = {k}")
        if not 1 <= k_r < k:
            raise ConfigError("k_r", f"k_r = {k_r} must satisfy 1 <= k_r < k = {k}")
        if "k_t" in system and system["k_t"] != k - k_r:
            raise ConfigError("k_t", f"k_t = {system['k_t']} inconsistent with k - k_r = {k - k_r}")
        system["k_t"] = k - k_r

    kwargs = {}
    for key, value in system.items():
        name = SYSTEM_KEYS[key]
        if key.endswith("_dbm"):
            value = 0.0 if value is None else float(dbm_to_watts(value))
        if name is not None:
            kwargs[name] = value
    defaults = SystemConfig()
    centers = list(defaults.user_region_centers)
    if "r_center" in system:
        centers[0] = system["r_center"]
    if "t_center" in system:
        centers[1] = system["t_center"]
    kwargs["user_region_centers"] = tuple(centers)

    try:
        config = SystemConfig(**kwargs)
    except ValueError as exc:
        field_name = str(exc).split("for ")[-1].split(":")[0].strip()
        key = next((k for k, v in SYSTEM_KEYS.items() if v == field_name), field_name)
        raise ConfigError(key, str(exc)) from None
    try:
        options = AoOptions(**ao)
    except ValueError as exc:
        raise ConfigError(next(iter(ao), "options"), str(exc)) from None
    return config, options


def load_config(path):
    """Read a flat config file into (SystemConfig, AoOptions)."""
    return configs_from_pairs(read_pairs(path))


def config_to_pairs(config, options=None):
    """Inverse of :func:`configs_from_pairs` (dB/dBm units)."""
    from .scenario import watts_to_dbm

    pairs = {
        "m": config.M, "n": config.N, "k": config.K, "k_r": config.K_r,
        "p_max_dbm": float(watts_to_dbm(config.P_max)),
        "sigma2_dbm": float(watts_to_dbm(config.sigma2)),
        "delta2_dbm": float(watts_to_dbm(config.delta2)) if config.delta2 > 0 else None,
        "e_min_dbm": float(watts_to_dbm(config.E_min)) if config.E_min > 0 else None,
        "eta": config.eta, "c0_db": config.C0_db, "d0": config.d0,
        "alpha_bs_ris": config.alpha_bs_ris, "alpha_ris_user": config.alpha_ris_user,
        "alpha_bs_user": config.alpha_bs_user, "rician_k_db": config.rician_k_db,
        "bs_pos": list(config.bs_pos), "ris_pos": list(config.ris_pos),
        "r_center": list(config.user_region_centers[0]), "t_center": list(config.user_region_centers[1]),
        "user_region_radius": config.user_region_radius, "seed": config.seed,
    }
    if options is not None:
        for key, name in AO_KEYS.items():
            pairs[key] = getattr(options, name)
    return pairs


__all__ = ["ConfigError", "load_config", "read_pairs", "configs_from_pairs", "config_to_pairs",
           "parse_value", "SYSTEM_KEYS", "AO_KEYS"]
