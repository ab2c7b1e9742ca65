"""Command-line entry point ``mhdstab``.

Subcommands::

    mhdstab run <config>        integrate one scenario and write its artifacts
    mhdstab dio --n a,b,c --r R --K K
    mhdstab linear <config> [--k k1,k2,k3]
    mhdstab compare <config>    run the main and the ``compare.params`` branch

Exit codes: 0 ok, 2 configuration error, 3 blow-up, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import checkpoint, diagnostics as dg, initial, report
from .config import RunConfig, load_config
from .diophantine import scan_constant
from .errors import ConfigError, InvalidBackgroundError, NumericalError, PreparationError, VacuumError
from .linear import abscissa_scan, mode_matrix, spectrum
from .system import AdmissibilityWarning, Params, State
from .timestepper import RunResult, StepperConfig, run

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("mhdstab")


def _vector(text: str, path: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", path) from exc
    if len(values) != 3:
        raise ConfigError(f"expected 3 components, got {len(values)}", path)
    return values


def initial_state(cfg: RunConfig, p: Params) -> State:
    raw = initial.make(cfg.ic_kind, cfg.grid, cfg.amplitude, cfg.seed, norm_index=cfg.functional.top)
    try:
        s, _ = dg.prepare_initial_data(raw, p)
    except PreparationError as exc:
        raise ConfigError(str(exc), "ic.amplitude") from exc
    return s


def simulate(
    cfg: RunConfig, p: Params, t_end: float, out_dir: Path | None = None
) -> tuple[list[dg.DiagnosticsRecord], RunResult | None]:
    """Integrate one branch, returning its records. ``t_end = 0`` yields no samples."""
    s0 = initial_state(cfg, p)
    if t_end == 0:
        return [], None
    records: list[dg.DiagnosticsRecord] = []
    stepper = StepperConfig(
        t_end=t_end,
        dt_max=cfg.stepper.dt_max,
        cfl=cfg.stepper.cfl,
        sample_stride=cfg.stepper.sample_stride,
    )

    def sink(t: float, s: State) -> None:
        records.append(dg.record(t, s, p, cfg.functional))
        if out_dir is not None and cfg.checkpoint_stride and (len(records) - 1) % cfg.checkpoint_stride == 0:
            checkpoint.save(out_dir / f"checkpoint_{len(records) - 1:06d}.bin", s, p, t)

    result = run(s0, p, stepper, sink=sink)
    return records, result


def _blowup_dict(result: RunResult | None) -> dict | None:
    if result is None or result.blowup is None:
        return None
    b = result.blowup
    return {"t": b.t, "step": b.step, "reason": b.reason, "h2_norm": b.h2_norm,
            "h2_initial": b.h2_initial, "min_density": b.min_density}


def cmd_run(path) -> int:
    cfg = load_config(path)
    p = cfg.params
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    margin = dg.positivity_self_check(cfg.grid, cfg.functional, p)
    certificate = None
    if np.any(p.n_vec != 0):
        certificate = scan_constant(p.n, cfg.r, cfg.K).to_json()
    started = time.time()
    records, result = simulate(cfg, p, cfg.stepper.t_end, out)
    report.write_series(out / "series.csv", records)
    summary = report.evaluate(records, cfg.functional)
    summary.update(
        certificate=certificate,
        positivity_margin=margin,
        gamma=cfg.functional.gamma,
        steps=result.steps if result else 0,
        blowup=_blowup_dict(result),
        wall_seconds=time.time() - started,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    report.write_json(out / "summary.json", summary)
    if records:
        report.plot_decay(out / "decay.svg", records, dg.decay_exponent(cfg.functional))
    failed = [k for k, v in summary["checks"].items() if not v["pass"]]
    log.info("run finished: %d samples, failed checks: %s", len(records), ", ".join(failed) or "none")
    if result is not None and not result.completed:
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_dio(n: str, r: float, big_k: int) -> int:
    try:
        bg = scan_constant(_vector(n, "n"), r, big_k)
    except InvalidBackgroundError as exc:
        raise ConfigError(str(exc), "dio") from exc
    print(json.dumps(bg.to_json()))
    return EXIT_OK


def _linear_row(k, ndotk, absc, eig) -> list[str]:
    return (
        [str(int(v)) for v in k]
        + [report.fmt(ndotk), report.fmt(absc)]
        + [report.fmt(v) for v in eig.real]
        + [report.fmt(v) for v in eig.imag]
    )


LINEAR_COLUMNS = (
    ["k1", "k2", "k3", "ndotk", "abscissa"]
    + [f"re_lambda_{i}" for i in range(1, 8)]
    + [f"im_lambda_{i}" for i in range(1, 8)]
)


def cmd_linear(path, k: str | None = None) -> int:
    cfg = load_config(path)
    p = cfg.params
    if k is not None:
        kv = tuple(int(round(v)) for v in _vector(k, "k"))
        if kv == (0, 0, 0):
            raise ConfigError("the zero mode has no dynamics", "k")
        eig = spectrum(mode_matrix(kv, p))
        for lam in eig:
            print(f"{lam.real:.17g} {lam.imag:+.17g}j")
        return EXIT_OK
    scan = abscissa_scan(p, cfg.K)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "linear.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LINEAR_COLUMNS)
        for i in range(len(scan.modes)):
            writer.writerow(_linear_row(scan.modes[i], scan.ndotk[i], scan.abscissa[i], scan.eigenvalues[i]))
    slices = sorted({0, 1, cfg.K})
    report.plot_abscissa(out / "abscissa.svg", scan.modes, scan.abscissa, slices)
    print(json.dumps({"global_max": scan.global_max, "argmax": list(scan.argmax), "modes": len(scan.modes)}))
    return EXIT_OK


def cmd_compare(path) -> int:
    cfg = load_config(path)
    if cfg.compare_params is None:
        raise ConfigError("compare needs a second parameter set", "compare.params")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    branches = {
        "main": (cfg.params, cfg.stepper.t_end),
        "contrast": (cfg.compare_params, cfg.compare_t_end),
    }
    records, results = {}, {}
    for name, (p, t_end) in branches.items():
        (out / name).mkdir(exist_ok=True)
        records[name], results[name] = simulate(cfg, p, t_end)
        report.write_series(out / name / "series.csv", records[name])
    with open(out / "compare.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["branch", "t", "grad_u_inf"])
        for name, recs in records.items():
            for rec in recs:
                writer.writerow([name, report.fmt(rec.t), report.fmt(rec.grad_u_inf)])
    summary = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
    for name, recs in records.items():
        g = [r.grad_u_inf for r in recs]
        summary[name] = {
            "params": {"R": branches[name][0].R, "kappa": branches[name][0].kappa,
                       "sigma": branches[name][0].sigma, "n": list(branches[name][0].n)},
            "samples": len(recs),
            "t_final": recs[-1].t if recs else 0.0,
            "grad_u_initial": g[0] if g else None,
            "growth_factor": max(g) / g[0] if g and g[0] > 0 else None,
            "final_factor": g[-1] / g[0] if g and g[0] > 0 else None,
            "blowup": _blowup_dict(results[name]),
        }
    report.write_json(out / "summary.json", summary)
    if any(records.values()):
        report.plot_compare(out / "grad_u.svg", {k: v for k, v in records.items() if v})
    main = results["main"]
    if main is not None and not main.completed:
        return EXIT_BLOWUP
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhdstab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="integrate a scenario")
    p_run.add_argument("config")
    p_dio = sub.add_parser("dio", help="Diophantine certificate for n")
    p_dio.add_argument("--n", required=True)
    p_dio.add_argument("--r", type=float, default=2.5)
    p_dio.add_argument("--K", type=int, default=16)
    p_lin = sub.add_parser("linear", help="per-mode spectra and abscissa map")
    p_lin.add_argument("config")
    p_lin.add_argument("--k", help="print the spectrum of a single mode k1,k2,k3")
    p_cmp = sub.add_parser("compare", help="run two parameter sets side by side")
    p_cmp.add_argument("config")
    return parser


def _dispatch(args) -> int:
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "dio":
        return cmd_dio(args.n, args.r, args.K)
    if args.command == "linear":
        return cmd_linear(args.config, args.k)
    return cmd_compare(args.config)


def _report_admissibility(caught) -> None:
    """One stderr line instead of a warning per step."""
    hits = [w for w in caught if issubclass(w.category, AdmissibilityWarning)]
    for w in caught:
        if w not in hits:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    if hits:
        print(f"warning: {len(hits)} admissibility warnings, last: {hits[-1].message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", AdmissibilityWarning)
            code = _dispatch(args)
        _report_admissibility(caught)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, VacuumError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
