"""One-hidden-layer tanh network ``y = w^T tanh(V u + beta)`` with scalar output.

Parameter vector layout: ``theta = [w (n_h); V row-major (n_h*m); beta (n_h)]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ConfigurationError, Problem


@dataclass(frozen=True)
class MLPShape:
    input_dim: int = 1
    hidden_units: int = 10

    @property
    def n_params(self):
        return self.hidden_units * (self.input_dim + 2)

    def unpack(self, theta):
        """Split one ``(P,)`` vector or a ``(q, P)`` batch into ``w, V, beta``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.n_params:
            raise ConfigurationError(
                f"parameter vector has length {theta.shape[-1]}, expected {self.n_params}"
            )
        h, m = self.hidden_units, self.input_dim
        w = theta[..., :h]
        V = theta[..., h : h + h * m].reshape(theta.shape[:-1] + (h, m))
        beta = theta[..., h + h * m :]
        return w, V, beta

    def pack(self, w, V, beta):
        return np.concatenate([np.ravel(w), np.ravel(V), np.ravel(beta)])


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        d = np.asarray(self.targets, dtype=float).ravel()
        if len(u) != len(d) or len(d) < 1:
            raise ConfigurationError("dataset needs >= 1 sample and equal-length inputs/targets")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "targets", d)

    def __len__(self):
        return len(self.targets)


def _hidden(shape, theta, U):
    w, V, beta = shape.unpack(theta)
    # (..., N, h)
    z = np.einsum("...hm,km->...kh", V, U) + beta[..., None, :]
    return w, np.tanh(z)


def mlp_forward(shape: MLPShape, theta, u):
    """Network output.

    A single input (scalar or length-``m`` vector) with a single parameter
    vector gives a float; otherwise an array over inputs (and members).
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim <= 1 and u.size == shape.input_dim
    U = u.reshape(-1, shape.input_dim)
    w, a = _hidden(shape, theta, U)
    y = np.einsum("...kh,...h->...k", a, w)
    if single and np.ndim(theta) == 1:
        return float(y[0])
    return y


def _sse_and_grad(shape, theta, data, need_grad=True):
    theta = np.asarray(theta, dtype=float)
    U, d = data.inputs, data.targets
    w, a = _hidden(shape, theta, U)
    y = np.einsum("...kh,...h->...k", a, w)
    r = y - d
    J = 0.5 * np.sum(r * r, axis=-1)
    if not need_grad:
        return J, None
    # backpropagation through the single tanh layer
    gw = np.einsum("...k,...kh->...h", r, a)
    delta = r[..., :, None] * w[..., None, :] * (1 - a * a)
    gV = np.einsum("...kh,km->...hm", delta, U)
    gb = np.sum(delta, axis=-2)
    g = np.concatenate([gw, gV.reshape(gV.shape[:-2] + (-1,)), gb], axis=-1)
    return J, g


def mlp_sse(shape: MLPShape, theta, data: Dataset):
    """Sum-squared error ``0.5 * sum (d_k - y_k)^2`` and its gradient."""
    return _sse_and_grad(shape, theta, data)


def mlp_sse_regularized(shape: MLPShape, theta, data: Dataset, mu=0.0, zeta=1.0):
    """Weight-decay variant ``zeta * J + mu/2 * theta^T theta`` (baseline comparator)."""
    if mu < 0 or zeta < 0:
        raise ConfigurationError("mu and zeta must be non-negative")
    theta = np.asarray(theta, dtype=float)
    J, g = _sse_and_grad(shape, theta, data)
    return zeta * J + 0.5 * mu * np.sum(theta * theta, axis=-1), zeta * g + mu * theta


def mlp_problem(shape: MLPShape, data: Dataset, mu=0.0, zeta=1.0):
    if mu == 0.0 and zeta == 1.0:
        fg = lambda th: _sse_and_grad(shape, th, data)
        name = "mlp_sse"
    else:
        fg = lambda th: mlp_sse_regularized(shape, th, data, mu, zeta)
        name = "mlp_sse_regularized"
    return Problem(
        dim=shape.n_params,
        cost=lambda th: float(fg(th)[0]),
        gradient=lambda th: fg(th)[1],
        name=name,
        batch_cost=lambda T: fg(T)[0],
        batch_gradient=lambda T: fg(T)[1],
    )


def gen_sine_dataset(n_points=20, noise_std=0.4, rng=None, interval=(-np.pi, np.pi)):
    """Noisy samples of ``sin`` on a uniform grid over ``interval``."""
    if n_points < 1:
        raise ConfigurationError("n_points must be >= 1")
    rng = np.random.default_rng(rng)
    u = np.linspace(interval[0], interval[1], n_points)
    d = np.sin(u)
    if noise_std > 0:
        d = d + rng.normal(0.0, noise_std, n_points)
    return Dataset(u, d)


def sine_test_grid(n_points=500, interval=(-np.pi, np.pi)):
    """Noiseless dense grid used to measure generalization."""
    u = np.linspace(interval[0], interval[1], n_points)
    return Dataset(u, np.sin(u))


def generalization_mse(shape: MLPShape, theta, grid: Dataset):
    """Mean squared error against a noiseless grid (per member for a batch)."""
    y = mlp_forward(shape, theta, grid.inputs)
    return np.mean((np.asarray(y) - grid.targets) ** 2, axis=-1)

