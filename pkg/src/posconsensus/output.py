"""Trace and summary writers.

``trace.csv`` is long format: one row per (step, agent) plus a ``leader`` row
per step. Columns::

    k, sigma, agent, nx, x_1..x_X, w_1..w_W, eta_1..eta_X, u_1..u_M, y_1..y_L, e_1..e_L

``nx`` is the true state width of the row; unused padded cells are empty.
Leader rows hold ``x0`` in the ``x`` columns and ``y0`` in the ``y`` columns.
Inputs are empty at the final step ``k = horizon``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .sim import (
    DEFAULT_THRESHOLD,
    SimulationTrace,
    convergence_from_errors,
    convergence_report,
    positivity_report,
)

MAX_LISTED_VIOLATIONS = 20


def trace_columns(t: SimulationTrace) -> list[str]:
    X = max([t.x0.shape[1]] + [xi.shape[1] for xi in t.x])
    W = t.w.shape[2]
    M = max(ui.shape[1] for ui in t.u)
    L = t.y0.shape[1]
    cols = ["k", "sigma", "agent", "nx"]
    cols += [f"x_{c + 1}" for c in range(X)]
    cols += [f"w_{c + 1}" for c in range(W)]
    cols += [f"eta_{c + 1}" for c in range(X)]
    cols += [f"u_{c + 1}" for c in range(M)]
    cols += [f"y_{c + 1}" for c in range(L)]
    cols += [f"e_{c + 1}" for c in range(L)]
    return cols


def _pad(values, width) -> list:
    out = [repr(float(v)) for v in values]
    return out + [""] * (width - len(out))


def write_trace_csv(t: SimulationTrace, path) -> None:
    cols = trace_columns(t)
    X = sum(c.startswith("x_") for c in cols)
    W = sum(c.startswith("w_") for c in cols)
    M = sum(c.startswith("u_") for c in cols)
    L = sum(c.startswith("y_") for c in cols)
    e = t.e
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for k in range(t.horizon + 1):
            sig = int(t.sigma[k])
            writer.writerow([k, sig, "leader", t.x0.shape[1]] + _pad(t.x0[k], X) + [""] * W
                            + [""] * X + [""] * M + _pad(t.y0[k], L) + [""] * L)
            for i in range(t.n_followers):
                eta = _pad(t.eta[i][k], X) if t.eta is not None else [""] * X
                u = _pad(t.u[i][k], M) if k < t.horizon else [""] * M
                writer.writerow([k, sig, i + 1, t.x[i].shape[1]] + _pad(t.x[i][k], X)
                                + _pad(t.w[k, i], W) + eta + u + _pad(t.y[k, i], L)
                                + _pad(e[k, i], L))


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def summarize(t: SimulationTrace, threshold: float = DEFAULT_THRESHOLD) -> dict:
    pos = positivity_report(t)
    conv = convergence_report(t, threshold)
    obs = convergence_from_errors(t.observer_error_norms(), threshold)
    report = t.report.as_dict() if t.report is not None else None
    summary = {
        "mode": t.mode,
        "horizon": t.horizon,
        "n_followers": t.n_followers,
        "outside_hypotheses": t.outside_hypotheses,
        "assumptions": report,
        "graph_constants": report["graph_constants"] if report else None,
        "regulator_residuals": ([None if r is None else r["residual"] for r in report["regulator"]]
                                if report else None),
        "positivity": {
            "min_state_entry": pos.min_entry,
            "violation_count": len(pos.violations),
            "violations": [list(v) for v in pos.violations[:MAX_LISTED_VIOLATIONS]],
            "eta_min": pos.eta_min,
            "eta_above_state_count": len(pos.eta_bound_violations),
            "pass": pos.ok,
        },
        "convergence": {
            "quantity": "observer_error" if t.mode == "observer" else "tracking_error",
            "threshold": threshold,
            "converged": conv.converged,
            "first_step": conv.first_step,
            "tail_error": conv.tail_error,
            "pass": conv.converged,
        },
        "observer_convergence": {
            "threshold": threshold,
            "converged": obs.converged,
            "first_step": obs.first_step,
            "tail_error": obs.tail_error,
        },
    }
    return summary


def _series_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows([int(r[0])] + list(r[1:]) for r in rows)


def write_plot_data(t: SimulationTrace, out_dir) -> list[Path]:
    """Per-figure tables: leader vs observers, outputs vs leader output, follower states."""
    out_dir = Path(out_dir)
    ks = np.arange(t.horizon + 1)
    n0, N, L = t.x0.shape[1], t.n_followers, t.y0.shape[1]
    wt = t.observer_error()

    header = ["k"] + [f"x0_{c + 1}" for c in range(n0)]
    header += [f"w{i + 1}_{c + 1}" for i in range(N) for c in range(n0)]
    header += [f"wtilde{i + 1}_{c + 1}" for i in range(N) for c in range(n0)]
    rows = np.column_stack([ks, t.x0, t.w.reshape(len(ks), -1), wt.reshape(len(ks), -1)])
    p_obs = out_dir / "plot_observer.csv"
    _series_table(p_obs, header, rows.tolist())

    header = ["k"] + [f"y0_{c + 1}" for c in range(L)]
    header += [f"y{i + 1}_{c + 1}" for i in range(N) for c in range(L)]
    rows = np.column_stack([ks, t.y0, t.y.reshape(len(ks), -1)])
    p_out = out_dir / "plot_outputs.csv"
    _series_table(p_out, header, rows.tolist())

    header, cols = ["k"], [ks]
    for i, xi in enumerate(t.x):
        header += [f"x{i + 1}_{c + 1}" for c in range(xi.shape[1])]
        cols.append(xi)
    if t.eta is not None:
        for i, ei in enumerate(t.eta):
            header += [f"eta{i + 1}_{c + 1}" for c in range(ei.shape[1])]
            cols.append(ei)
    p_states = out_dir / "plot_states.csv"
    _series_table(p_states, header, np.column_stack(cols).tolist())
    return [p_obs, p_out, p_states]


def write_run(t: SimulationTrace, out_dir, threshold: float = DEFAULT_THRESHOLD) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(t, out_dir / "trace.csv")
    summary = summarize(t, threshold)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    write_plot_data(t, out_dir)
    return summary
