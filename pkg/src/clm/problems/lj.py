"""Lennard-Jones cluster energies in reduced units.

Coordinates are flat ``(3N,)`` vectors ``[x1, y1, z1, x2, ...]``.  The shifted
form ``4 sum[(r + mu)^(-2 nu) - (r + mu)^(-nu)]`` reduces to the plain
potential at ``mu = 0, nu = 6`` and is bounded at ``r = 0`` for ``mu > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DomainError, Problem


@dataclass(frozen=True)
class LJCluster:
    coordinates: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coordinates, dtype=float).ravel()
        if c.size == 0 or c.size % 3:
            raise DomainError(f"coordinate vector length {c.size} is not a positive multiple of 3")
        object.__setattr__(self, "coordinates", c)

    @property
    def atom_count(self):
        return self.coordinates.size // 3

    @property
    def positions(self):
        return self.coordinates.reshape(-1, 3)


def _pairs(flat):
    pos = np.asarray(flat, dtype=float).reshape(-1, 3)
    i, j = np.triu_indices(len(pos), 1)
    d = pos[i] - pos[j]
    r = np.sqrt(np.einsum("ij,ij->i", d, d))
    return pos, i, j, d, r


def _energy(r, mu, nu):
    s = (r + mu) ** (-float(nu))
    return 4.0 * np.sum(s * s - s)


def _check(r, mu, allow_zero):
    if r.size and np.min(r + mu) <= 0:
        raise DomainError("coincident atoms: pair distance plus shift is not positive")
    if not allow_zero and r.size and np.min(r) == 0:
        raise DomainError("coincident atoms: gradient direction undefined")


def shifted_energy(flat, mu=0.1, nu=3):
    _, _, _, _, r = _pairs(flat)
    _check(r, mu, allow_zero=True)
    return float(_energy(r, mu, nu))


def shifted_gradient(flat, mu=0.1, nu=3):
    pos, i, j, d, r = _pairs(flat)
    _check(r, mu, allow_zero=False)
    s = (r + mu) ** (-float(nu))
    # dU/dr for each pair, projected onto the unit separation vector
    dudr = 4.0 * nu * (s - 2.0 * s * s) / (r + mu)
    f = (dudr / r)[:, None] * d
    g = np.zeros_like(pos)
    np.add.at(g, i, f)
    np.add.at(g, j, -f)
    return g.ravel()


def lj_cost(c):
    flat = c.coordinates if isinstance(c, LJCluster) else c
    return shifted_energy(flat, 0.0, 6)


def lj_grad(c):
    flat = c.coordinates if isinstance(c, LJCluster) else c
    return shifted_gradient(flat, 0.0, 6)


def lj_shifted(c, mu=0.1, nu=3):
    """``(cost, gradient)`` of the shifted potential."""
    flat = c.coordinates if isinstance(c, LJCluster) else c
    return shifted_energy(flat, mu, nu), shifted_gradient(flat, mu, nu)


def _batch_pairs(X, n_atoms):
    pos = np.asarray(X, dtype=float).reshape(len(X), n_atoms, 3)
    i, j = np.triu_indices(n_atoms, 1)
    d = pos[:, i] - pos[:, j]
    r = np.sqrt(np.einsum("qpk,qpk->qp", d, d))
    return pos, i, j, d, r


def batch_energy(X, n_atoms, mu=0.0, nu=6):
    """Energies of a ``(q, 3N)`` batch of clusters."""
    _, _, _, _, r = _batch_pairs(X, n_atoms)
    _check(r, mu, allow_zero=True)
    s = (r + mu) ** (-float(nu))
    return 4.0 * np.sum(s * s - s, axis=1)


def batch_gradient(X, n_atoms, mu=0.0, nu=6):
    pos, i, j, d, r = _batch_pairs(X, n_atoms)
    _check(r, mu, allow_zero=False)
    s = (r + mu) ** (-float(nu))
    f = (4.0 * nu * (s - 2.0 * s * s) / ((r + mu) * r))[..., None] * d
    # scatter pair forces onto atoms via incidence matrix (deterministic order)
    inc = _incidence(n_atoms)
    return np.einsum("ap,qpk->qak", inc, f).reshape(len(X), -1)


_INCIDENCE = {}


def _incidence(n_atoms):
    if n_atoms not in _INCIDENCE:
        i, j = np.triu_indices(n_atoms, 1)
        inc = np.zeros((n_atoms, len(i)))
        inc[i, np.arange(len(i))] = 1.0
        inc[j, np.arange(len(i))] = -1.0
        _INCIDENCE[n_atoms] = inc
    return _INCIDENCE[n_atoms]


def lj_problem(n_atoms, mu=0.0, nu=6):
    """Cluster energy as a :class:`Problem`; shifted when ``(mu, nu) != (0, 6)``."""
    plain = mu == 0.0 and nu == 6
    return Problem(
        dim=3 * n_atoms,
        cost=lj_cost if plain else (lambda x: shifted_energy(x, mu, nu)),
        gradient=lj_grad if plain else (lambda x: shifted_gradient(x, mu, nu)),
        name=f"lj{n_atoms}" if plain else f"lj{n_atoms}_shifted",
        batch_cost=lambda X: batch_energy(X, n_atoms, mu, nu),
        batch_gradient=lambda X: batch_gradient(X, n_atoms, mu, nu),
    )
