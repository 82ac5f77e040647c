"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .scenario import ChannelSet


def _finite_complex(name, array, shape):
    array = np.asarray(array)
    if array.shape != shape:
        raise ValueError(f"{name} has shape {array.shape}, expected {shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite entries")
    return array.astype(complex, copy=False)


def check_channel_set(channels, config=None):
    """Validate shapes and values of a :class:`ChannelSet`; returns it unchanged.

    With ``config`` the dimensions must also match M, N, K and K_r.
    """
    if not isinstance(channels, ChannelSet):
        raise TypeError(f"expected a ChannelSet, got {type(channels).__name__}")
    N, M = np.shape(channels.G)
    K = np.shape(channels.h)[0]
    _finite_complex("G", channels.G, (N, M))
    _finite_complex("h", channels.h, (K, M))
    _finite_complex("g", channels.g, (K, N))
    sides = np.asarray(channels.sides)
    if sides.shape != (K,) or not set(sides.tolist()) <= {"r", "t"}:
        raise ValueError("sides must hold one 'r' or 't' tag per user")
    if config is not None:
        expected = {"M": config.M, "N": config.N, "K": config.K, "K_r": config.K_r}
        actual = {"M": M, "N": N, "K": K, "K_r": channels.K_r}
        for key, value in expected.items():
            if actual[key] != value:
                raise ValueError(f"channel {key} = {actual[key]} does not match config {key} = {value}")
    return channels


def check_solution(solution, channels):
    """Shape checks for a ``SolutionState`` against ``channels``."""
    K, M, N = channels.K, channels.M, channels.N
    if solution.beams.f.shape != (K, M):
        raise ValueError(f"beamformers have shape {solution.beams.f.shape}, expected {(K, M)}")
    for name in ("beta_r", "beta_t", "theta_r", "theta_t"):
        if getattr(solution.star, name).shape != (N,):
            raise ValueError(f"{name} must have length {N}")
    if solution.ps.rho.shape != (K,):
        raise ValueError(f"rho must have length {K}")
    return solution
