"""Run configured experiments and write their artifacts.

Artifacts of ``run``: ``trace.csv`` (one row per completed window, flushed as
it goes), ``summary.json``, ``plot_trace.py`` and, for cluster problems,
``best.xyz``.  ``bench`` adds ``comparison.csv`` and ``bench_summary.json``.
"""
from __future__ import annotations

import csv
import logging
import os
import time
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import multistart_descent, quasi_newton
from .config import ExperimentConfig, dump_json, load_dataset
from .core import EnsembleState
from .integrate import RunFailure, best_member, run_clm
from .io import write_xyz
from .problems import MLPShape, generalization_mse, sine_test_grid

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "CLM_OUTPUT_ROOT"


def output_dir(exp: ExperimentConfig, override=None) -> Path:
    """``override`` if given, else ``$CLM_OUTPUT_ROOT/<output.dir or name>``."""
    if override is not None:
        return Path(override)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / (exp.raw["output"]["dir"] or exp.name)


def trace_header(q):
    return (["window", "t"] + [f"U_{i + 1}" for i in range(q)]
            + ["avgU", "sync_residual", "eta"] + [f"gamma_{i + 1}" for i in range(q)]
            + ["renumbered"])


def trace_row(rec, offset=0.0):
    return ([rec.window, repr(rec.t)] + [repr(float(u) - offset) for u in rec.costs]
            + [repr(rec.avg_cost - offset), repr(rec.sync_residual), repr(rec.eta)]
            + [repr(float(g)) for g in rec.gamma] + [int(rec.renumbered is not None)])


class NumericalRunError(Exception):
    """Raised by :func:`run_experiment` after the partial outputs are written."""

    def __init__(self, message, out_dir):
        super().__init__(message)
        self.out_dir = out_dir


def _polish(problem, ens, pcfg):
    i, xb, cb = best_member(ens, problem)
    if not pcfg["enabled"]:
        return i, xb, cb, xb, cb
    rows = [i] if pcfg["members"] == "best" else range(ens.q)
    best = None
    for k in rows:
        r = quasi_newton(problem, ens.x[k], grad_tol=pcfg["grad_tol"], max_iter=pcfg["max_iter"])
        if np.isfinite(r.cost) and (best is None or r.cost < best[1]):
            best = (r.x, r.cost)
    if best is None:
        return i, xb, cb, xb, cb
    return i, xb, cb, best[0], best[1]


def run_clm_phases(exp: ExperimentConfig, init: EnsembleState, on_record=None):
    """Run every phase in order.  Returns ``(ensemble, [phase info], windows)``.

    Window numbers and times continue across phases.  ``on_record(rec,
    offset)`` sees each record with the phase's cost offset.
    """
    ens, info = init, []
    done, t0 = 0, 0.0
    for k, (prob, windows) in enumerate(exp.phase_problems()):
        spec = exp.raw["problem"] if exp.raw["phases"] is None else exp.raw["phases"][k]["problem"]
        offset = spec["offset"]
        cfg = replace(exp.clm, max_windows=windows)

        def cb(rec, _ens, done=done, t0=t0, offset=offset):
            if on_record is not None:
                on_record(replace(rec, window=rec.window + done, t=rec.t + t0), offset)

        start = EnsembleState.from_states(ens.x)
        try:
            ens, trace = run_clm(prob, cfg, start, callback=cb)
        except RunFailure as exc:
            exc.phase = k
            raise
        done += len(trace)
        t0 += len(trace) * cfg.delta_t
        last = trace.records[-1] if trace.records else None
        log.info("phase %d (%s): %d windows, stop: %s", k, spec["name"], len(trace), trace.stop_reason)
        info.append({
            "phase": k, "problem": spec["name"], "windows": len(trace),
            "stop_reason": trace.stop_reason,
            "final_avg_cost": None if last is None else last.avg_cost - offset,
            "final_sync_residual": None if last is None else last.sync_residual,
            "nfev": int(sum(r.nfev for r in trace.records)),
        })
    return ens, info, done


def _write_plot_script(out: Path):
    (out / "plot_trace.py").write_text(
        '"""Plot trace.csv from this directory (needs matplotlib)."""\n'
        "import csv\nimport sys\nfrom pathlib import Path\n\n"
        "import matplotlib.pyplot as plt\n\n"
        "here = Path(__file__).parent\n"
        "rows = list(csv.DictReader(open(here / 'trace.csv')))\n"
        "t = [float(r['t']) for r in rows]\n"
        "cols = [c for c in rows[0] if c.startswith('U_')] if rows else []\n"
        "fig, ax = plt.subplots(3, 1, sharex=True, figsize=(7, 8))\n"
        "for c in cols:\n"
        "    ax[0].plot(t, [float(r[c]) for r in rows], lw=0.6)\n"
        "ax[0].plot(t, [float(r['avgU']) for r in rows], 'k', lw=1.5, label='<U>')\n"
        "ax[0].set_ylabel('cost'); ax[0].legend()\n"
        "ax[1].semilogy(t, [float(r['sync_residual']) for r in rows])\n"
        "ax[1].set_ylabel('sync residual')\n"
        "ax[2].semilogy(t, [float(r['eta']) for r in rows])\n"
        "ax[2].set_ylabel('eta'); ax[2].set_xlabel('t')\n"
        "fig.tight_layout()\n"
        "fig.savefig(sys.argv[1] if len(sys.argv) > 1 else here / 'trace.png', dpi=120)\n"
    )


def _mlp_extras(exp, ens, x_best):
    p = exp.raw["problem"]["params"]
    shape = MLPShape(int(p["input_dim"]), int(p["hidden_units"]))
    grid = sine_test_grid()
    return {
        "test_mse_best": float(generalization_mse(shape, x_best, grid)),
        "test_mse_members": [float(v) for v in generalization_mse(shape, ens.x, grid)],
        "member_variance": float(np.mean(np.var(ens.x, axis=0))),
        "train_points": int(len(load_dataset(p["dataset"]).targets)),
    }


def _atomic_json(path: Path, obj):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(dump_json(obj) + "\n")
    os.replace(tmp, path)


def run_experiment(exp: ExperimentConfig, out=None, init=None):
    """Execute one configured run and write its artifacts; returns the summary.

    Raises :class:`NumericalRunError` (after writing the partial trace and a
    failure summary) when the integration breaks down.
    """
    out = output_dir(exp, out)
    out.mkdir(parents=True, exist_ok=True)
    target = exp.target_problem()
    init = exp.initial_ensemble(exp.seed) if init is None else init
    t_start = time.perf_counter()
    _write_plot_script(out)
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(exp.clm.q))

        def on_record(rec, offset):
            w.writerow(trace_row(rec, offset))
            fh.flush()

        try:
            ens, phases, windows = run_clm_phases(exp, init, on_record)
        except RunFailure as exc:
            fh.flush()
            summary = {
                "status": "numerical_failure", "message": str(exc),
                "phase": getattr(exc, "phase", None), "windows": len(exc.trace),
                "wall_time_s": time.perf_counter() - t_start, "config": exp.raw,
            }
            _atomic_json(out / "summary.json", summary)
            raise NumericalRunError(str(exc), out) from exc
    i, x_pre, c_pre, x_post, c_post = _polish(target, ens, exp.raw["polish"])
    summary = {
        "status": "ok",
        "best_member": i,
        "best_cost_pre_polish": c_pre,
        "best_cost_post_polish": c_post,
        "argmin": [float(v) for v in x_post],
        "argmin_pre_polish": [float(v) for v in x_pre],
        "windows": windows,
        "phases": phases,
        "wall_time_s": time.perf_counter() - t_start,
        "config": exp.raw,
    }
    name = exp.raw["problem"]["name"]
    if name.startswith("lj"):
        write_xyz(out / "best.xyz", x_post, energy=c_post, comment=f"N={target.dim // 3}")
    if name == "mlp":
        summary["mlp"] = _mlp_extras(exp, ens, x_post)
    _atomic_json(out / "summary.json", summary)
    return summary


def _best_cost(results):
    costs = [r.cost for r in results if np.isfinite(r.cost)]
    return min(costs) if costs else float("nan")


def bench_seed(exp: ExperimentConfig, seed: int, out: Path):
    """CLM and both baselines from the same initial ensemble for one seed."""
    e = exp.with_seed(seed)
    init = e.initial_ensemble(seed)
    target = e.target_problem()
    row = {"seed": seed, "clm_best": float("nan"), "multistart_best": float("nan"),
           "quasi_newton_best": float("nan"), "status": "ok"}
    try:
        row["clm_best"] = run_experiment(e, out / f"seed_{seed}", init)["best_cost_post_polish"]
    except NumericalRunError:
        row["status"] = "numerical_failure"
    b = e.raw["baselines"]
    if b["multistart"]:
        row["multistart_best"] = _best_cost(
            multistart_descent(target, init.x, grad_tol=b["grad_tol"], max_iter=b["max_iter"]))
    if b["quasi_newton"]:
        row["quasi_newton_best"] = _best_cost(
            [quasi_newton(target, x, grad_tol=b["grad_tol"], max_iter=b["max_iter"]) for x in init.x])
    return row


def _win_rate(rows, other):
    pairs = [(r["clm_best"], r[other]) for r in rows
             if np.isfinite(r["clm_best"]) and np.isfinite(r[other])]
    if not pairs:
        return None
    wins = sum(c <= o + 1e-12 * max(1.0, abs(o)) for c, o in pairs)
    return {"wins": int(wins), "compared": len(pairs), "rate": wins / len(pairs)}


def run_bench(exp: ExperimentConfig, seeds, out=None, workers=1):
    """Benchmark over ``seeds``; writes comparison.csv and bench_summary.json."""
    out = output_dir(exp, out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in seeds]
    t_start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(bench_seed, [exp] * len(seeds), seeds, [out] * len(seeds)))
    else:
        rows = [bench_seed(exp, s, out) for s in seeds]
    rows.sort(key=lambda r: r["seed"])
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "clm_best", "multistart_best", "quasi_newton_best"])
        for r in rows:
            w.writerow([r["seed"], repr(r["clm_best"]), repr(r["multistart_best"]),
                        repr(r["quasi_newton_best"])])
    summary = {
        "seeds": seeds,
        "clm_vs_multistart": _win_rate(rows, "multistart_best"),
        "clm_vs_quasi_newton": _win_rate(rows, "quasi_newton_best"),
        "failed_seeds": [r["seed"] for r in rows if r["status"] != "ok"],
        "wall_time_s": time.perf_counter() - t_start,
        "config": exp.raw,
    }
    _atomic_json(out / "bench_summary.json", summary)
    return rows, summary
