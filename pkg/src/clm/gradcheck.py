"""Finite-difference check of every registered analytic gradient."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .baselines import finite_diff_grad, gradient_rel_error
from .core import Problem
from .problems import (
    MLPShape,
    double_well_problem,
    gen_sine_dataset,
    lj_problem,
    mlp_problem,
    multimodal10_problem,
    offset_cost,
)


def cluster_points(n_atoms, rng, spacing=1.2, jitter=0.2):
    """Random cluster with no pair closer than ``spacing - 2*jitter*sqrt(3)``.

    Atoms sit on randomly chosen sites of a cubic lattice, then move by up to
    ``jitter`` per coordinate, so the energy stays well away from the core.
    """
    side = int(np.ceil(n_atoms ** (1 / 3))) + 1
    sites = np.array(np.meshgrid(*[np.arange(side)] * 3, indexing="ij")).reshape(3, -1).T
    pick = sites[rng.choice(len(sites), n_atoms, replace=False)] * spacing
    return (pick + rng.uniform(-jitter, jitter, pick.shape)).ravel()


@dataclass(frozen=True)
class GradcheckEntry:
    name: str
    problem: Problem
    sample: Callable  # rng -> point


def default_registry() -> List[GradcheckEntry]:
    """Every problem family shipped with the package, at a representative size."""
    shape = MLPShape(1, 10)
    data = gen_sine_dataset(20, 0.4, 0)
    lj8 = lj_problem(8)
    return [
        GradcheckEntry("double_well", double_well_problem(), lambda r: r.uniform(-5, 5, 1)),
        GradcheckEntry("multimodal10", multimodal10_problem(), lambda r: r.uniform(-20, 20, 10)),
        GradcheckEntry("lj", lj8, lambda r: cluster_points(8, r)),
        GradcheckEntry("lj_shifted", lj_problem(8, 0.1, 3), lambda r: cluster_points(8, r)),
        GradcheckEntry("lj_offset", offset_cost(lj8, 200.0), lambda r: cluster_points(8, r)),
        GradcheckEntry("mlp_sse", mlp_problem(shape, data), lambda r: r.normal(0, 1, shape.n_params)),
        GradcheckEntry(
            "mlp_regularized",
            mlp_problem(shape, data, mu=0.1, zeta=0.5),
            lambda r: r.normal(0, 1, shape.n_params),
        ),
    ]


def run_gradcheck(registry=None, points=100, tol=1e-5, seed=0) -> Dict[str, float]:
    """Worst relative error per problem over ``points`` random points each."""
    registry = default_registry() if registry is None else registry
    worst = {}
    for k, entry in enumerate(registry):
        rng = np.random.default_rng([seed, k])
        err = 0.0
        for _ in range(points):
            x = np.asarray(entry.sample(rng), dtype=float)
            e = gradient_rel_error(entry.problem.gradient(x), finite_diff_grad(entry.problem, x))
            err = max(err, e if np.isfinite(e) else np.inf)
        worst[entry.name] = err
    return worst
