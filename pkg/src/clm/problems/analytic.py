"""Closed-form test landscapes."""
from __future__ import annotations

import numpy as np

from ..core import Problem


def double_well(x):
    """``x^4 - 16 x^2 + 5 x + 100``; global minimum near ``x = -2.90``."""
    x = np.asarray(x, dtype=float)
    return x**4 - 16 * x**2 + 5 * x + 100


def double_well_grad(x):
    x = np.asarray(x, dtype=float)
    return 4 * x**3 - 32 * x + 5


def double_well_problem():
    return Problem(
        dim=1,
        cost=lambda x: float(double_well(x[0])),
        gradient=lambda x: np.atleast_1d(double_well_grad(x[0])),
        name="double_well",
        batch_cost=lambda X: double_well(X[:, 0]),
        batch_gradient=lambda X: double_well_grad(X),
    )


def _cos_products(X, omega):
    c = np.cos(omega * X)
    return c, np.prod(c, axis=-1)


def multimodal10(x, a=0.01, w1=0.2, w2=1.0):
    """Quadratic bowl minus two cosine products; ``U(0) = 0``.

    Works on a single point ``(n,)`` or a batch ``(q, n)``.
    """
    X = np.asarray(x, dtype=float)
    n = X.shape[-1]
    _, p1 = _cos_products(X, w1)
    _, p2 = _cos_products(X, w2)
    return a / (2 * n) * np.sum(X * X, axis=-1) + 8 * n - 4 * n * p1 - 4 * n * p2


def _prod_grad(X, omega):
    # d/dx_j prod_i cos(w x_i) = -w sin(w x_j) prod_{i != j} cos(w x_i),
    # built from prefix/suffix products so zeros in cos are handled exactly
    c = np.cos(omega * X)
    ones = np.ones(X.shape[:-1] + (1,))
    left = np.cumprod(np.concatenate([ones, c[..., :-1]], axis=-1), axis=-1)
    right = np.cumprod(np.concatenate([ones, c[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return -omega * np.sin(omega * X) * left * right


def multimodal10_grad(x, a=0.01, w1=0.2, w2=1.0):
    X = np.asarray(x, dtype=float)
    n = X.shape[-1]
    return a / n * X - 4 * n * _prod_grad(X, w1) - 4 * n * _prod_grad(X, w2)


def multimodal10_problem(n=10, a=0.01, w1=0.2, w2=1.0):
    f = lambda X: multimodal10(X, a, w1, w2)
    g = lambda X: multimodal10_grad(X, a, w1, w2)
    return Problem(
        dim=n, cost=lambda x: float(f(x)), gradient=g, name="multimodal10",
        batch_cost=f, batch_gradient=g,
    )


def quadratic_problem(n=1, scale=0.5):
    """``scale * ||x||^2``."""
    f = lambda X: scale * np.sum(np.asarray(X) ** 2, axis=-1)
    g = lambda X: 2 * scale * np.asarray(X, dtype=float)
    return Problem(dim=n, cost=lambda x: float(f(x)), gradient=g, name="quadratic",
                   batch_cost=f, batch_gradient=g)


def rosenbrock_problem():
    def cost(x):
        return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)

    def grad(x):
        return np.array([
            -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
            200 * (x[1] - x[0] ** 2),
        ])

    return Problem(dim=2, cost=cost, gradient=grad, name="rosenbrock")


def offset_cost(p: Problem, delta: float) -> Problem:
    """Same problem with ``delta`` added to the cost; gradient untouched."""
    bc = None if p.batch_cost is None else (lambda X: p.batch_cost(X) + delta)
    return Problem(
        dim=p.dim,
        cost=lambda x: p.cost(x) + delta,
        gradient=p.gradient,
        name=f"{p.name}+offset",
        batch_cost=bc,
        batch_gradient=p.batch_gradient,
    )
