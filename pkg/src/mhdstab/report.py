"""Series files, run summaries and plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagnosticsRecord, FunctionalConfig, decay_exponent, decay_fit
from .errors import DomainError

# tolerances of the built-in checks
BALANCE_TOL = 1e-7
DRIFT_TOL = 1e-8
DIVB_TOL = 1e-10
MONOTONE_TOL = 1e-9
DISSIPATION_FRACTION = 0.01
BOUND_FACTOR = 4.0
POINCARE_CAP = 10.0


def fmt(value: float) -> str:
    return f"{value:.17g}"


def write_series(path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([fmt(v) for v in rec.csv_row()])


def read_series(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: cols[:, i] for i, name in enumerate(header)}


# checks ---------------------------------------------------------------------


def _arr(records, name):
    return np.array([getattr(r, name) for r in records], dtype=float)


def conservation_drift(records: Sequence[DiagnosticsRecord]) -> dict[str, float]:
    """Largest deviation from the first sample of each conserved quantity."""
    first = records[0]
    out = {
        "mass": max(abs(r.mass_pert - first.mass_pert) for r in records),
        "momentum": max(
            max(abs(x - y) for x, y in zip(r.momentum, first.momentum)) for r in records
        ),
        "b_mean": max(max(abs(x - y) for x, y in zip(r.b_mean, first.b_mean)) for r in records),
        "energy": max(abs(r.total_energy - first.total_energy) for r in records),
    }
    return {k: float(v) for k, v in out.items()}


def lyapunov_metrics(records: Sequence[DiagnosticsRecord], t_start: float = 0.1) -> dict[str, float]:
    """Monotonicity of E after ``t_start`` and the discrete dE/dt versus D.

    ``worst_increase`` is the largest ratio ``E_{i+1} / E_i`` for samples past
    ``t_start``. ``worst_rate`` is the largest trapezoidal
    ``(dE/dt) / (D_i + D_{i+1}) * 2`` over all consecutive pairs.
    """
    t = _arr(records, "t")
    e = _arr(records, "E")
    d = _arr(records, "D")
    if len(t) < 2:
        return {"worst_increase": 0.0, "worst_rate": -math.inf}
    late = np.nonzero(t >= t_start)[0]
    pairs = [(i, i + 1) for i in late if i + 1 < len(t)]
    worst_increase = max((e[j] / e[i] for i, j in pairs if e[i] > 0), default=0.0)
    rates = (e[1:] - e[:-1]) / (t[1:] - t[:-1]) / (0.5 * (d[1:] + d[:-1]) + 1e-300)
    return {"worst_increase": float(worst_increase), "worst_rate": float(np.max(rates))}


def decay_bound_margin(records: Sequence[DiagnosticsRecord], factor: float = BOUND_FACTOR) -> float:
    """max_t ||X(t)||_{H^{r+4}} / (factor ||X(0)||_{H^{r+4}} (1 + t)^(-3/2)); <= 1 passes."""
    t = _arr(records, "t")
    h = _arr(records, "h_r4")
    return float(np.max(h / (factor * h[0] * (1.0 + t) ** -1.5)))


def evaluate(records: Sequence[DiagnosticsRecord], fcfg: FunctionalConfig) -> dict:
    """Margins and pass/fail of the built-in trajectory checks."""
    if not records:
        return {"samples": 0, "empty": True, "checks": {}}
    drift = conservation_drift(records)
    lyap = lyapunov_metrics(records)
    balance = max(r.balance_relative for r in records)
    divb = max(r.divb_max for r in records)
    poincare = max(r.poincare_margin for r in records)
    bound = decay_bound_margin(records)
    fit = None
    t = _arr(records, "t")
    try:
        f = decay_fit(t, _arr(records, "h_r4"), t_min=min(1.0, t[-1] / 2))
        fit = {"slope": f.slope, "constant": f.constant, "late_slope": f.late_slope,
               "super_algebraic": f.super_algebraic, "samples": f.samples}
    except (ValueError, DomainError) as exc:
        fit = {"error": str(exc)}
    checks = {
        "balance": {"value": balance, "tol": BALANCE_TOL, "pass": balance <= BALANCE_TOL},
        "conservation": {"value": max(drift.values()), "tol": DRIFT_TOL,
                         "pass": max(drift.values()) <= DRIFT_TOL},
        "divergence": {"value": divb, "tol": DIVB_TOL, "pass": divb <= DIVB_TOL},
        "E_monotone": {"value": lyap["worst_increase"], "tol": 1 + MONOTONE_TOL,
                       "pass": lyap["worst_increase"] <= 1 + MONOTONE_TOL},
        "dEdt_vs_D": {"value": lyap["worst_rate"], "tol": -DISSIPATION_FRACTION,
                      "pass": lyap["worst_rate"] <= -DISSIPATION_FRACTION},
        "decay_bound": {"value": bound, "tol": 1.0, "pass": bound <= 1.0},
        "decay_slope": {"value": fit.get("slope", math.nan), "tol": -1.5,
                        "pass": fit.get("slope", math.inf) <= -1.5},
        "poincare": {"value": poincare, "tol": POINCARE_CAP, "pass": poincare <= POINCARE_CAP},
    }
    return {
        "samples": len(records),
        "empty": False,
        "t_final": records[-1].t,
        "decay_fit": fit,
        "decay_exponent": decay_exponent(fcfg),
        "drift": drift,
        "min_density": min(r.min_density for r in records),
        "checks": checks,
    }


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(type(obj))


# plots ----------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "mhdstab"
    return plt


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_decay(path, records: Sequence[DiagnosticsRecord], exponent: float) -> None:
    """Log-log plot of the top-order norm and E against 1 + t with a reference slope."""
    plt = _pyplot()
    t = _arr(records, "t")
    x = 1.0 + t
    h = _arr(records, "h_r4")
    e = _arr(records, "E")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(x, h, label="H^{r+4} norm")
    ax.loglog(x, np.abs(e), label="|E|")
    if len(t) and h[0] > 0:
        ax.loglog(x, h[0] * x ** (-exponent), "k--", label=f"slope -{exponent:.3g}")
    ax.set_xlabel("1 + t")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_compare(path, branches: dict[str, Sequence[DiagnosticsRecord]]) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, recs in branches.items():
        ax.semilogy(_arr(recs, "t"), _arr(recs, "grad_u_inf"), label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("max |grad u|")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_abscissa(path, modes: np.ndarray, abscissa: np.ndarray, slices: Sequence[int]) -> None:
    """Heat maps of log10 |abscissa| over (k1, k2) at the given k3 values."""
    plt = _pyplot()
    big_k = int(np.max(np.abs(modes)))
    fig, axes = plt.subplots(1, len(slices), figsize=(4 * len(slices), 3.6), squeeze=False)
    for ax, k3 in zip(axes[0], slices):
        grid = np.full((2 * big_k + 1, 2 * big_k + 1), np.nan)
        sel = modes[:, 2] == k3
        for (k1, k2, _), val in zip(modes[sel], abscissa[sel]):
            grid[k2 + big_k, k1 + big_k] = np.log10(max(abs(val), 1e-300)) if val != 0 else np.nan
        im = ax.imshow(grid, origin="lower", extent=(-big_k - 0.5, big_k + 0.5, -big_k - 0.5, big_k + 0.5))
        ax.set_title(f"k3 = {k3}")
        ax.set_xlabel("k1")
        ax.set_ylabel("k2")
        fig.colorbar(im, ax=ax, label="log10 |abscissa|")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
