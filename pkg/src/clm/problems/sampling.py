"""Initial ensembles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ConfigurationError, EnsembleState


@dataclass(frozen=True)
class InitialPrior:
    """Isotropic zero-mean Gaussian with standard deviation ``sigma``."""

    sigma: float = 0.1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")


def sample_initial_states(prior: InitialPrior, q: int, n: int, rng=None) -> EnsembleState:
    """Members drawn i.i.d. from ``N(0, sigma^2 I)``; multipliers start at zero."""
    rng = np.random.default_rng(rng)
    return EnsembleState.from_states(rng.normal(0.0, prior.sigma, size=(q, n)))


def sample_uniform_states(low: float, high: float, q: int, n: int, rng=None) -> EnsembleState:
    """Members uniform on the box ``[low, high]^n``; multipliers zero."""
    if not low < high:
        raise ConfigurationError("need low < high")
    rng = np.random.default_rng(rng)
    return EnsembleState.from_states(rng.uniform(low, high, size=(q, n)))
