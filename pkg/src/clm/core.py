"""Ensemble state and the coupled-minimizer vector field.

The ensemble lives on a ring of ``q`` members: member ``i`` is constrained to
agree with member ``i+1`` and index arithmetic is modulo ``q``.  Coupling
weights and multipliers wrap around the same way, so ``gamma[-1]`` couples
the last member back to the first.

Flat layout used by the integrators::

    [x(1); ...; x(q); lambda(1); ...; lambda(q)]      length 2*q*n
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class CLMError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(CLMError, ValueError):
    pass


class DomainError(CLMError, ValueError):
    """Cost evaluated outside its domain (e.g. coincident atoms)."""


class NumericalFailure(CLMError, FloatingPointError):
    """A cost or gradient went non-finite.  ``index`` names the member."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Problem:
    """A differentiable cost ``U: R^n -> R``.

    ``batch_cost``/``batch_gradient`` are optional vectorized versions taking a
    ``(q, n)`` array; when missing, the single-point callables are looped.
    """

    dim: int
    cost: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str = "problem"
    batch_cost: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    batch_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ConfigurationError(f"problem dimension must be >= 1, got {self.dim}")

    def costs(self, X):
        X = np.asarray(X, dtype=float)
        if self.batch_cost is not None:
            return np.asarray(self.batch_cost(X), dtype=float)
        return np.array([self.cost(x) for x in X], dtype=float)

    def gradients(self, X):
        X = np.asarray(X, dtype=float)
        if self.batch_gradient is not None:
            return np.asarray(self.batch_gradient(X), dtype=float)
        return np.array([self.gradient(x) for x in X], dtype=float)


@dataclass(frozen=True)
class ScheduleParams:
    """Coupling weights (one per ring constraint) and the learning rate."""

    gamma: np.ndarray
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float).ravel())
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """States ``x`` and multipliers ``lam``, both shaped ``(q, n)``.

    Arrays are copied and marked read-only on construction.
    """

    x: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float, ndmin=2)
        lam = np.array(self.lam, dtype=float, ndmin=2)
        if x.ndim != 2 or x.shape != lam.shape:
            raise ConfigurationError(
                f"x and lambda must be (q, n) arrays of equal shape, got {x.shape} and {lam.shape}"
            )
        if x.shape[0] < 2 or x.shape[1] < 1:
            raise ConfigurationError(f"need q >= 2 members of dimension n >= 1, got {x.shape}")
        x.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_states(cls, x):
        """Ensemble with zero multipliers."""
        x = np.array(x, dtype=float, ndmin=2)
        return cls(x, np.zeros_like(x))

    @classmethod
    def from_flat(cls, flat, q, n):
        flat = np.asarray(flat, dtype=float)
        if flat.size != 2 * q * n:
            raise ConfigurationError(f"flat state has {flat.size} entries, expected {2 * q * n}")
        return cls(flat[: q * n].reshape(q, n), flat[q * n :].reshape(q, n))

    @property
    def q(self):
        return self.x.shape[0]

    @property
    def n(self):
        return self.x.shape[1]

    def to_flat(self):
        return np.concatenate([self.x.ravel(), self.lam.ravel()])


def _check_dims(ens, p):
    if ens.n != p.dim:
        raise ConfigurationError(f"ensemble dimension {ens.n} does not match problem dimension {p.dim}")


def _check_gamma(ens, s):
    if s.gamma.shape != (ens.q,):
        raise ConfigurationError(f"expected {ens.q} coupling weights, got {s.gamma.shape[0]}")


def ring_differences(x):
    """``x(i) - x(i+1)`` for every ring constraint."""
    return x - np.roll(x, -1, axis=0)


def coupling_field(x, lam, gamma):
    """Constraint part of the state derivative.

    ``h(i) = gamma[i-1](x(i-1) - x(i)) - gamma[i](x(i) - x(i+1)) + lam(i-1) - lam(i)``
    """
    d = gamma[:, None] * ring_differences(x)
    return np.roll(d, 1, axis=0) - d + np.roll(lam, 1, axis=0) - lam


def member_costs(ens: EnsembleState, p: Problem) -> np.ndarray:
    _check_dims(ens, p)
    return p.costs(ens.x)


def average_cost(ens: EnsembleState, p: Problem) -> float:
    """Mean cost over the ensemble."""
    return float(np.mean(member_costs(ens, p)))


def augmented_lagrangian(ens: EnsembleState, p: Problem, s: ScheduleParams) -> float:
    _check_dims(ens, p)
    _check_gamma(ens, s)
    d = ring_differences(ens.x)
    objective = s.eta / ens.q * np.sum(p.costs(ens.x))
    soft = 0.5 * np.sum(s.gamma * np.sum(d * d, axis=1))
    hard = np.sum(ens.lam * d)
    return float(objective + soft + hard)


def checked_gradients(p: Problem, x) -> np.ndarray:
    g = p.gradients(x)
    bad = ~np.all(np.isfinite(g), axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericalFailure(f"non-finite gradient for member {idx}", index=idx)
    return g


def clm_rhs(ens: EnsembleState, p: Problem, s: ScheduleParams) -> EnsembleState:
    """Time derivative of the coupled system, returned in ensemble shape.

    ``xdot(i) = -(eta/q) grad U(x(i)) + h(i)`` and ``lamdot(i) = x(i) - x(i+1)``.
    """
    _check_dims(ens, p)
    _check_gamma(ens, s)
    g = checked_gradients(p, ens.x)
    xdot = -(s.eta / ens.q) * g + coupling_field(ens.x, ens.lam, s.gamma)
    return EnsembleState(xdot, ring_differences(ens.x))


def flat_rhs(p: Problem, s: ScheduleParams, q: int) -> Callable[[float, np.ndarray], np.ndarray]:
    """Flat-vector version of :func:`clm_rhs` for the integrator (autonomous)."""
    n = p.dim
    m = q * n
    gamma = s.gamma[:, None]
    scale = s.eta / q
    if s.gamma.shape != (q,):
        raise ConfigurationError(f"expected {q} coupling weights, got {s.gamma.shape[0]}")
    grads = p.batch_gradient if p.batch_gradient is not None else p.gradients

    def rhs(t, y):
        x = y[:m].reshape(q, n)
        lam = y[m:].reshape(q, n)
        g = grads(x)
        if not np.isfinite(g).all():
            checked_gradients(p, x)
        out = np.empty_like(y)
        xdot = out[:m].reshape(q, n)
        ldot = out[m:].reshape(q, n)
        # ldot = x(i) - x(i+1); xdot = shift(gamma*d) - gamma*d + shift(lam) - lam
        np.subtract(x[:-1], x[1:], out=ldot[:-1])
        np.subtract(x[-1], x[0], out=ldot[-1])
        gd = gamma * ldot
        np.multiply(g, -scale, out=xdot)
        xdot -= gd
        xdot -= lam
        xdot[1:] += gd[:-1]
        xdot[0] += gd[-1]
        xdot[1:] += lam[:-1]
        xdot[0] += lam[-1]
        return out

    return rhs


def sync_residual(ens: EnsembleState) -> float:
    """Largest distance between ring neighbours; zero once synchronized."""
    return float(np.max(np.linalg.norm(ring_differences(ens.x), axis=1)))
