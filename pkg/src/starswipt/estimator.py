"""Estimator-style wrapper around the alternating optimizer."""

from __future__ import annotations

from dataclasses import fields

from sklearn.base import BaseEstimator

from .ao import AoOptions
from .baselines import Scheme, run_baseline
from .model import sum_rate
from .scenario import SystemConfig
from .validation import check_channel_set


class StarSwiptOptimizer(BaseEstimator):
    """Maximize the sum rate for one channel realization.

    ``fit(channels)`` runs the selected scheme and stores ``solution_`` and
    ``report_``; ``score(channels)`` is the sum rate (bits/s/Hz) of the
    fitted solution on ``channels``. ``config`` defaults to
    ``SystemConfig()`` sized to the channels.

    >>> from starswipt import SystemConfig, build_channels, StarSwiptOptimizer
    >>> cfg = SystemConfig(M=2, N=4)
    >>> opt = StarSwiptOptimizer(config=cfg, max_outer=3, random_state=0)
    >>> opt.fit(build_channels(cfg, 0)).report_.status in ("converged", "max_iter")
    True
    """

    def __init__(self, scheme="es", config=None, epsilon=1e-3, max_outer=30, trials=50,
                 rank_tol=1e-3, feas_tol=1e-6, backend="cvxopt", equal_power_split=False,
                 random_state=None):
        self.scheme = scheme
        self.config = config
        self.epsilon = epsilon
        self.max_outer = max_outer
        self.trials = trials
        self.rank_tol = rank_tol
        self.feas_tol = feas_tol
        self.backend = backend
        self.equal_power_split = equal_power_split
        self.random_state = random_state

    def _options(self):
        names = {f.name for f in fields(AoOptions)}
        return AoOptions(**{k: v for k, v in self.get_params().items() if k in names})

    def _config(self, channels):
        if self.config is not None:
            return self.config
        return SystemConfig(M=channels.M, N=channels.N, K_r=channels.K_r, K_t=channels.K - channels.K_r)

    def fit(self, channels, y=None):
        config = self._config(channels)
        check_channel_set(channels, config)
        self.config_ = config
        self.report_ = run_baseline(Scheme.parse(self.scheme), channels, config, self._options(),
                                    self.random_state)
        self.solution_ = self.report_.solution
        self.n_iter_ = self.report_.iterations
        return self

    def score(self, channels, y=None):
        check_channel_set(channels, self.config_)
        if Scheme.parse(self.scheme) is Scheme.WITHOUT_RIS:
            channels = channels.without_surface()
        return sum_rate(channels, self.solution_, self.config_)
