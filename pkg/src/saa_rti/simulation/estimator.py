"""Simulated friction identification with a reporting delay."""
from __future__ import annotations

from dataclasses import dataclass

from ..constraints import FrictionEstimate
from .plant import FrictionField

ADAPTIVE = "adaptive"
STATIC = "static"


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = ADAPTIVE
    mu_asm: float = 0.8
    delay: float = 0.1

    def __post_init__(self):
        if self.mode not in (ADAPTIVE, STATIC):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if self.delay < 0:
            raise ValueError("estimator delay must be non-negative")
        if not 0 < self.mu_asm <= 1.5:
            raise ValueError("assumed friction must lie in (0, 1.5]")


class FrictionEstimator:
    """Reports the friction under the vehicle as it was ``delay`` seconds ago.

    Before any observation is old enough, the assumed value is reported.
    Static mode always reports the assumed value.
    """

    def __init__(self, cfg: EstimatorConfig, field: FrictionField):
        self.cfg = cfg
        self.field = field
        self._changes: list[tuple[float, float]] = []

    def estimate(self, t: float, s: float) -> FrictionEstimate:
        if self.cfg.mode == STATIC:
            return FrictionEstimate(self.cfg.mu_asm, t)
        mu_now = self.field.at(s)
        if not self._changes or self._changes[-1][1] != mu_now:
            self._changes.append((t, mu_now))
        value = self.cfg.mu_asm
        for t_change, mu in self._changes:
            if t_change + self.cfg.delay <= t + 1e-12:
                value = mu
        return FrictionEstimate(value, t)


def estimator_step(t: float, field: FrictionField, s: float, cfg: EstimatorConfig,
                   history: list | None = None) -> FrictionEstimate:
    """Stateless form: ``history`` (list of ``(t, mu)`` change events) is updated in place."""
    est = FrictionEstimator(cfg, field)
    if history is not None:
        est._changes = history
    return est.estimate(t, s)
