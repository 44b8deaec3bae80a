"""Reference local optimizers and the finite-difference gradient oracle."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, Problem


@dataclass
class LocalMinResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    grad_norm: float
    start_index: int = 0
    message: str = ""


def finite_diff_grad(p: Problem, x, h_rule=None) -> np.ndarray:
    """Central differences with ``h_i = 1e-5 * (1 + |x_i|)`` unless overridden."""
    x = np.asarray(x, dtype=float)
    h = 1e-5 * (1.0 + np.abs(x)) if h_rule is None else np.broadcast_to(h_rule(x), x.shape)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        g[i] = (p.cost(xp) - p.cost(xm)) / (xp[i] - xm[i])
    return g


def gradient_rel_error(analytic, numeric) -> float:
    """``||a - b|| / max(||a||, ||b||)``, zero when both vanish."""
    a = np.asarray(analytic, dtype=float)
    b = np.asarray(numeric, dtype=float)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def steepest_descent(p: Problem, x0, max_iter=10_000, grad_tol=1e-8,
                     step0=1.0, c1=1e-4) -> LocalMinResult:
    """Gradient descent with Armijo backtracking (halving)."""
    x = np.array(x0, dtype=float)
    f = p.cost(x)
    g = p.gradient(x)
    step = step0
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return LocalMinResult(x, float("inf"), 0, False, float("nan"), message="non-finite start")
    for it in range(1, max_iter + 1):
        gn = float(np.linalg.norm(g))
        if gn < grad_tol:
            return LocalMinResult(x, float(f), it - 1, True, gn, message="gradient below tolerance")
        step = min(2.0 * step, 1e8)
        while True:
            x_new = x - step * g
            f_new = p.cost(x_new)
            if np.isfinite(f_new) and f_new <= f - c1 * step * gn * gn:
                break
            step *= 0.5
            if step * gn < 1e-300 or step < 1e-30:
                return LocalMinResult(x, float(f), it, False, gn, message="line search failed")
        g_new = p.gradient(x_new)
        if not np.all(np.isfinite(g_new)):
            return LocalMinResult(x, float(f), it, False, gn, message="non-finite gradient")
        done = abs(f - f_new) <= 1e-15 * max(1.0, abs(f))
        x, f, g = x_new, f_new, g_new
        if done:
            return LocalMinResult(x, float(f), it, True, float(np.linalg.norm(g)),
                                  message="cost change below tolerance")
    return LocalMinResult(x, float(f), max_iter, False, float(np.linalg.norm(g)),
                          message="iteration limit")


def multistart_descent(p: Problem, starts, max_iter=10_000, grad_tol=1e-8, step0=1.0):
    """Independent steepest-descent runs, one per start, sorted by final cost.

    A start that hits a non-finite cost is reported with ``converged=False``
    and does not affect the others.
    """
    starts = [np.asarray(s, dtype=float) for s in starts]
    if not starts:
        raise ConfigurationError("multistart_descent needs at least one start")
    out = []
    for k, s in enumerate(starts):
        try:
            r = steepest_descent(p, s, max_iter=max_iter, grad_tol=grad_tol, step0=step0)
        except (FloatingPointError, ValueError, ArithmeticError) as exc:
            r = LocalMinResult(s, float("inf"), 0, False, float("nan"), message=str(exc))
        r.start_index = k
        out.append(r)
    return sorted(out, key=lambda r: (r.cost, r.start_index))


def _cubic_min(a, fa, ga, b, fb, gb):
    # minimizer of the cubic interpolating (a, fa, ga), (b, fb, gb)
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    den = gb - ga + 2 * d2
    if den == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / den


def _wolfe_search(phi, f0, g0, step, c1=1e-4, c2=0.9, max_evals=40):
    """Strong-Wolfe line search (bracket then zoom).  Returns (alpha, f, grad, g_dir) or None."""
    a_prev, f_prev, d_prev = 0.0, f0, g0
    a = step
    evals = 0
    while evals < max_evals:
        f_a, grad_a, d_a = phi(a)
        evals += 1
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * g0 or (evals > 1 and f_a >= f_prev):
            return _zoom(phi, f0, g0, a_prev, f_prev, d_prev, a, f_a, d_a, c1, c2, max_evals - evals)
        if abs(d_a) <= -c2 * g0:
            return a, f_a, grad_a
        if d_a >= 0:
            return _zoom(phi, f0, g0, a, f_a, d_a, a_prev, f_prev, d_prev, c1, c2, max_evals - evals)
        a_prev, f_prev, d_prev = a, f_a, d_a
        a = 2.0 * a
    return None


def _zoom(phi, f0, g0, lo, f_lo, d_lo, hi, f_hi, d_hi, c1, c2, budget):
    for _ in range(max(budget, 0)):
        a = None
        if np.isfinite(f_hi) and np.isfinite(d_hi):
            a = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
        span = hi - lo
        if a is None or not np.isfinite(a) or not (min(lo, hi) + 0.1 * abs(span) <= a <= max(lo, hi) - 0.1 * abs(span)):
            a = lo + 0.5 * span
        f_a, grad_a, d_a = phi(a)
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * g0 or f_a >= f_lo:
            hi, f_hi, d_hi = a, f_a, d_a
        else:
            if abs(d_a) <= -c2 * g0:
                return a, f_a, grad_a
            if d_a * (hi - lo) >= 0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = a, f_a, d_a
        if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
            break
    if f_lo < f0:
        f_a, grad_a, _ = phi(lo)
        return lo, f_a, grad_a
    return None


def quasi_newton(p: Problem, x0, grad_tol=1e-8, max_iter=1000, memory=10) -> LocalMinResult:
    """Limited-memory BFGS with a strong-Wolfe line search.

    Never returns a point costlier than ``x0``.  A line-search failure ends the
    run with ``converged=False`` at the best iterate.
    """
    x = np.array(x0, dtype=float)
    f = float(p.cost(x))
    g = np.asarray(p.gradient(x), dtype=float)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return LocalMinResult(x, f, 0, False, float("nan"), message="non-finite start")
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    for it in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn < grad_tol:
            return LocalMinResult(x, f, it, True, gn, message="gradient below tolerance")
        # two-loop recursion
        qv = g.copy()
        alphas = []
        for s, y in reversed(list(zip(S, Y))):
            rho = 1.0 / np.dot(y, s)
            a = rho * np.dot(s, qv)
            qv -= a * y
            alphas.append((rho, a))
        if S:
            qv *= np.dot(S[-1], Y[-1]) / np.dot(Y[-1], Y[-1])
        for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
            b = rho * np.dot(y, qv)
            qv += (a - b) * s
        d = -qv
        slope = float(np.dot(g, d))
        if slope >= 0:
            S.clear()
            Y.clear()
            d = -g
            slope = -gn * gn
        step = 1.0 if S else min(1.0, 1.0 / gn)

        def phi(a, x=x, d=d):
            xa = x + a * d
            fa = float(p.cost(xa))
            ga = np.asarray(p.gradient(xa), dtype=float)
            return fa, ga, float(np.dot(ga, d)) if np.all(np.isfinite(ga)) else np.nan

        ls = _wolfe_search(phi, f, slope, step)
        if ls is None or not ls[1] <= f:
            return LocalMinResult(x, f, it, False, gn, message="line search failed")
        a, f_new, g_new = ls
        s = a * d
        y = g_new - g
        if np.dot(s, y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
        x, f, g = x + s, f_new, g_new
    gn = float(np.linalg.norm(g))
    return LocalMinResult(x, f, max_iter, gn < grad_tol, gn, message="iteration limit")
