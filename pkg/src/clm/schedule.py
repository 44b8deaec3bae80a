"""Per-window choice of coupling weights and learning rate, plus renumbering.

Within a window the average-cost rate of change is affine in ``gamma``, so the
weight that makes it most negative is found coordinate-wise from the sign of
each coefficient.  The learning rate is then chosen so that the ensemble's
excess cost follows ``d(<U> - U*)/dt = -alpha (<U> - U*)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigurationError, EnsembleState, coupling_field, ring_differences


@dataclass(frozen=True)
class ScheduleConfig:
    """Bounds and constants for the scheduler.

    ``gamma_fixed``/``eta_fixed`` bypass the corresponding rule and hold the
    value constant for the whole run (used by the two-particle double-well
    demonstration, which runs with unit coupling).
    """

    gamma_lo: float = 1.0
    gamma_hi: float = 10.0
    eta_lo: float = 1e-2
    eta_hi: float = 1e3
    alpha: float = 1.0
    u_star: float = 0.0
    renumber_period: int = 5
    renumber_fraction: float = 0.2
    gamma_fixed: Optional[float] = None
    eta_fixed: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.gamma_lo < self.gamma_hi:
            raise ConfigurationError("need 0 < gamma_lo < gamma_hi")
        if not 0 < self.eta_lo < self.eta_hi:
            raise ConfigurationError("need 0 < eta_lo < eta_hi")
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        if int(self.renumber_period) < 1:
            raise ConfigurationError("renumber_period must be a positive integer")
        if not 0.0 <= self.renumber_fraction <= 1.0:
            raise ConfigurationError("renumber_fraction must lie in [0, 1]")
        if self.gamma_fixed is not None and not self.gamma_fixed >= 0:
            raise ConfigurationError("gamma_fixed must be non-negative")
        if self.eta_fixed is not None and not self.eta_fixed > 0:
            raise ConfigurationError("eta_fixed must be positive")


def gamma_coefficients(ens: EnsembleState, grads) -> np.ndarray:
    """Coefficient of each ``gamma[i]`` in ``d<U>/dt``.

    ``c[i] = (1/q) <g(i+1) - g(i), x(i) - x(i+1)>``
    """
    grads = np.asarray(grads, dtype=float)
    if grads.shape != ens.x.shape:
        raise ConfigurationError(f"gradients shaped {grads.shape}, ensemble is {ens.x.shape}")
    dg = np.roll(grads, -1, axis=0) - grads
    return np.sum(dg * ring_differences(ens.x), axis=1) / ens.q


def schedule_gamma(c, cfg: ScheduleConfig) -> np.ndarray:
    """Minimize ``sum(c * gamma)`` over the closed box; ties go to ``gamma_lo``."""
    c = np.asarray(c, dtype=float)
    return np.where(c < 0, cfg.gamma_hi, cfg.gamma_lo)


@dataclass(frozen=True)
class EtaChoice:
    eta: float
    eta_raw: float
    stationary: bool = False

    @property
    def clamped(self):
        return self.eta != self.eta_raw


def schedule_eta_detail(ens: EnsembleState, grads, gamma, cfg: ScheduleConfig, costs) -> EtaChoice:
    """Learning rate from the target law, with the unclamped value kept."""
    grads = np.asarray(grads, dtype=float)
    costs = np.asarray(costs, dtype=float)
    q = ens.q
    denom = float(np.sum(grads * grads))
    if denom == 0.0:
        return EtaChoice(cfg.eta_lo, float("nan"), stationary=True)
    h = coupling_field(ens.x, ens.lam, np.asarray(gamma, dtype=float))
    num = q * float(np.sum(grads * h)) + q * cfg.alpha * (float(np.sum(costs)) - q * cfg.u_star)
    raw = num / denom
    return EtaChoice(float(np.clip(raw, cfg.eta_lo, cfg.eta_hi)), raw)


def schedule_eta(ens: EnsembleState, grads, gamma, cfg: ScheduleConfig, costs) -> float:
    """Learning rate that makes ``<U> - U*`` decay at rate ``alpha``, clamped.

    ``costs`` are the member costs ``U(x(i))`` matching ``grads``.
    """
    return schedule_eta_detail(ens, grads, gamma, cfg, costs).eta


def renumber_count(q, fraction):
    return int(round(fraction * q))


def renumber(ens: EnsembleState, cfg: ScheduleConfig, rng: np.random.Generator):
    """Shuffle a random subset of members (state and multiplier together).

    Returns the new ensemble and the index map ``perm`` with
    ``new[i] = old[perm[i]]``.
    """
    q = ens.q
    k = renumber_count(q, cfg.renumber_fraction)
    perm = np.arange(q)
    if k >= 2:
        chosen = np.sort(rng.choice(q, size=k, replace=False))
        perm[chosen] = chosen[rng.permutation(k)]
    return EnsembleState(ens.x[perm], ens.lam[perm]), perm
