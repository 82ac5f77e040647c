"""Comparison schemes: full ES surface, equal-amplitude ES, reflect-only surface, no surface."""

from __future__ import annotations

from enum import Enum

from .ao import run_ao
from .sdr import EQUAL_AMPLITUDE, ES, REFLECT_ONLY


class Scheme(str, Enum):
    ES_MODE = "es"
    EQUAL_AMPLITUDE_ES = "equal_amplitude"
    CONVENTIONAL_RIS = "conventional"
    WITHOUT_RIS = "without_ris"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"esmode": "es", "es_mode": "es", "equalamplitudees": "equal_amplitude",
                   "equal_amplitude_es": "equal_amplitude", "conventionalris": "conventional",
                   "conventional_ris": "conventional", "withoutris": "without_ris", "none": "without_ris"}
        key = str(value).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}") from None


_SURFACE_MODE = {
    Scheme.ES_MODE: ES,
    Scheme.EQUAL_AMPLITUDE_ES: EQUAL_AMPLITUDE,
    Scheme.CONVENTIONAL_RIS: REFLECT_ONLY,
    Scheme.WITHOUT_RIS: None,
}


def run_baseline(scheme, channels, config, opts=None, rng=None):
    """Run one comparison scheme and return its ``SolveReport``.

    The reflect-only surface keeps beta_r = 1, beta_t = 0, so users on the
    transmission side are served by their direct link alone. Without a
    surface the surface->user channels are zeroed and only the beam and
    PS-ratio blocks run.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.WITHOUT_RIS:
        channels = channels.without_surface()
    return run_ao(channels, config, opts, rng, surface_mode=_SURFACE_MODE[scheme])
