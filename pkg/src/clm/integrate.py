"""Adaptive Runge-Kutta windows and the outer scheduling loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    CLMError,
    ConfigurationError,
    DomainError,
    EnsembleState,
    NumericalFailure,
    Problem,
    ScheduleParams,
    checked_gradients,
    flat_rhs,
    sync_residual,
)
from .schedule import (
    ScheduleConfig,
    gamma_coefficients,
    renumber,
    schedule_eta_detail,
    schedule_gamma,
)

log = logging.getLogger(__name__)


class IntegrationError(CLMError):
    """Step size underflow.  Carries the last accepted state and its time."""

    def __init__(self, message, state, t):
        super().__init__(message)
        self.state = state
        self.t = t


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [np.array(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_LOW = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _B_LOW

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass
class IntegrationResult:
    y: np.ndarray
    steps: int = 0
    rejected: int = 0
    nfev: int = 0
    h_last: float = 0.0


def _initial_step(rhs, t, y, f0, atol, rtol, span):
    # Hairer, Norsett & Wanner, starting step heuristic (order 5)
    scale = atol + rtol * np.abs(y)
    d0 = np.max(np.abs(y) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = rhs(t + h0, y + h0 * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


def dopri5(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    delta_t: float,
    abs_tol: float = 1e-2,
    rel_tol: float = 1e-2,
    h0: Optional[float] = None,
    max_steps: int = 1_000_000,
) -> IntegrationResult:
    """Integrate ``y' = rhs(t, y)`` from ``t=0`` to exactly ``delta_t``.

    Error control is per component: every entry of the local error estimate
    must satisfy ``|err_k| <= abs_tol + rel_tol * max(|y_k|, |y_new_k|)``.
    """
    if not delta_t > 0:
        raise ConfigurationError("delta_t must be positive")
    if not (abs_tol > 0 and rel_tol > 0):
        raise ConfigurationError("tolerances must be positive")
    y = np.array(y0, dtype=float)
    t = 0.0
    f = rhs(t, y)
    nfev = 1
    if not np.all(np.isfinite(f)):
        raise NumericalFailure("non-finite derivative at the start of the window")
    if h0 is None or not h0 > 0:
        h = _initial_step(rhs, t, y, f, abs_tol, rel_tol, delta_t)
        nfev += 1
    else:
        h = min(h0, delta_t)
    res = IntegrationResult(y)
    k = np.empty((7, y.size))
    while t < delta_t:
        if res.steps + res.rejected >= max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps", y, t)
        h_min = 16 * np.finfo(float).eps * max(abs(t), delta_t)
        if h < h_min:
            raise IntegrationError(f"step size underflow at t={t:.6g} (h={h:.3g})", y, t)
        last = t + h >= delta_t * (1 - 1e-12)
        if last:
            h = delta_t - t
        k[0] = f
        try:
            # a trial stage that leaves the domain only means h was too large
            with np.errstate(over="ignore", invalid="ignore"):
                for s in range(1, 7):
                    k[s] = rhs(t + _C[s] * h, y + h * (_A[s] @ k[:s]))
                    nfev += 1
                y_new = y + h * (_B @ k)
                err = h * (_E @ k)
                scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
                err_norm = float(np.max(np.abs(err) / scale))
        except (NumericalFailure, DomainError):
            err_norm = np.inf
        if not np.isfinite(err_norm):
            res.rejected += 1
            h *= _MIN_FACTOR
            continue
        if err_norm <= 1.0:
            t = delta_t if last else t + h
            y = y_new
            f = k[6].copy()
            res.steps += 1
            res.h_last = h
            factor = _MAX_FACTOR if err_norm == 0 else min(_MAX_FACTOR, _SAFETY * err_norm ** -0.2)
            h *= max(factor, 1.0)
        else:
            res.rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
    res.y = y
    res.nfev = nfev
    return res


def integrate_window(state, rhs, delta_t, abs_tol=1e-2, rel_tol=1e-2) -> np.ndarray:
    """Advance a flat state by exactly ``delta_t`` of flow time."""
    return dopri5(rhs, state, delta_t, abs_tol, rel_tol).y


@dataclass(frozen=True)
class CLMConfig:
    q: int = 20
    delta_t: float = 0.1
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    integrator_abs_tol: float = 1e-2
    integrator_rel_tol: float = 1e-2
    max_windows: int = 1000
    stop_sync_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if int(self.q) < 2:
            raise ConfigurationError("q must be at least 2")
        if not self.delta_t > 0:
            raise ConfigurationError("delta_t must be positive")
        if not (self.integrator_abs_tol > 0 and self.integrator_rel_tol > 0):
            raise ConfigurationError("integrator tolerances must be positive")
        if int(self.max_windows) < 1:
            raise ConfigurationError("max_windows must be >= 1")


@dataclass
class WindowRecord:
    window: int
    t: float
    costs: np.ndarray
    avg_cost: float
    sync_residual: float
    gamma: np.ndarray
    eta: float
    eta_raw: float
    stationary: bool
    renumbered: Optional[np.ndarray]
    steps: int
    rejected: int
    nfev: int


@dataclass
class RunTrace:
    records: List[WindowRecord] = field(default_factory=list)
    initial_costs: Optional[np.ndarray] = None
    stop_reason: str = ""

    def __len__(self):
        return len(self.records)

    def avg_costs(self):
        return np.array([r.avg_cost for r in self.records])

    def times(self):
        return np.array([r.t for r in self.records])


class RunFailure(CLMError):
    """Run aborted.  Holds the trace up to the failing window."""

    def __init__(self, message, trace, state=None):
        super().__init__(message)
        self.trace = trace
        self.state = state


def best_member(ens: EnsembleState, p: Problem):
    """``(index, state, cost)`` of the cheapest member; first index wins ties."""
    costs = p.costs(ens.x)
    i = int(np.argmin(costs))
    return i, ens.x[i].copy(), float(costs[i])


def _stalled(trace, window=10, tol=1e-6):
    if len(trace.records) <= window:
        return False
    now = trace.records[-1].avg_cost
    before = trace.records[-1 - window].avg_cost
    # mixed tolerance so a cost settling at zero also counts as stalled
    return abs(now - before) <= tol * (1.0 + abs(before))


def run_clm(p: Problem, cfg: CLMConfig, init: EnsembleState, callback=None):
    """Alternate scheduling and integration windows until converged.

    Each window: gradients at the current state, LP for ``gamma``, target law
    for ``eta``, integration over ``delta_t`` with both held fixed, then every
    ``renumber_period``-th window a random renumbering.  Stops when the sync
    residual is below ``stop_sync_tol`` and the average cost has stopped
    moving, or after ``max_windows``.

    Returns ``(final_ensemble, trace)``.  Failures raise :class:`RunFailure`
    carrying the partial trace.
    """
    q, n = init.x.shape
    if q != cfg.q:
        raise ConfigurationError(f"initial ensemble has {q} members, config says q={cfg.q}")
    if n != p.dim:
        raise ConfigurationError(f"initial ensemble dimension {n} != problem dimension {p.dim}")
    sc = cfg.schedule
    rng = np.random.default_rng(cfg.seed)
    trace = RunTrace()
    ens = init
    t = 0.0
    h_hint = None
    costs = p.costs(ens.x)
    trace.initial_costs = costs.copy()
    for w in range(1, int(cfg.max_windows) + 1):
        if not np.all(np.isfinite(costs)):
            raise RunFailure(f"non-finite cost before window {w}", trace, ens)
        try:
            grads = checked_gradients(p, ens.x)
        except NumericalFailure as exc:
            raise RunFailure(f"window {w}: {exc}", trace, ens) from exc
        if sc.gamma_fixed is not None:
            gamma = np.full(q, float(sc.gamma_fixed))
        else:
            gamma = schedule_gamma(gamma_coefficients(ens, grads), sc)
        if sc.eta_fixed is not None:
            eta, eta_raw, stationary = float(sc.eta_fixed), float(sc.eta_fixed), False
        else:
            choice = schedule_eta_detail(ens, grads, gamma, sc, costs)
            eta, eta_raw, stationary = choice.eta, choice.eta_raw, choice.stationary
            if stationary:
                log.info("window %d: stationary ensemble, eta set to lower bound", w)
        rhs = flat_rhs(p, ScheduleParams(gamma, eta), q)
        try:
            out = dopri5(
                rhs, ens.to_flat(), cfg.delta_t,
                cfg.integrator_abs_tol, cfg.integrator_rel_tol, h0=h_hint,
            )
        except IntegrationError as exc:
            raise RunFailure(f"window {w}: {exc}", trace, EnsembleState.from_flat(exc.state, q, n)) from exc
        except NumericalFailure as exc:
            raise RunFailure(f"window {w}: {exc}", trace, ens) from exc
        h_hint = out.h_last
        ens = EnsembleState.from_flat(out.y, q, n)
        t += cfg.delta_t
        perm = None
        if w % int(sc.renumber_period) == 0 and sc.renumber_fraction > 0:
            ens, perm = renumber(ens, sc, rng)
        costs = p.costs(ens.x)
        rec = WindowRecord(
            window=w, t=t, costs=costs.copy(), avg_cost=float(np.mean(costs)),
            sync_residual=sync_residual(ens), gamma=gamma, eta=eta, eta_raw=eta_raw,
            stationary=stationary, renumbered=perm, steps=out.steps,
            rejected=out.rejected, nfev=out.nfev,
        )
        trace.records.append(rec)
        if callback is not None:
            callback(rec, ens)
        if not np.all(np.isfinite(costs)):
            raise RunFailure(f"non-finite cost after window {w}", trace, ens)
        if rec.sync_residual < cfg.stop_sync_tol and _stalled(trace):
            trace.stop_reason = "converged"
            break
    else:
        trace.stop_reason = "max_windows"
    return ens, trace
