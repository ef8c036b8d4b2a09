"""Command-line driver exposing the experiments as reproducible runs.

Subcommands: gammas, spectrum, pullback, check-equivariance, two-lifts,
convergence.  Exit codes: 0 pass, 1 tolerance failure, 2 configuration
error.  Reports are CSV (17 significant digits) plus JSON with a fixed
schema; figures are rendered alongside unless disabled.
"""

import argparse
import json
import sys

import numpy as np

from .clifford import build_gammas
from .config import build_config, read_config_file
from .diffeo import DiffeoAction, equivariance_residual, parse_diffeo
from .dirac import (
    dirac_for_metric,
    resolved_spectrum,
    spectra_distance,
    spectrum,
)
from .errors import ConfigError, SpinTorusError
from .fields import random_band_limited
from .geometry import SCHEME_ORDERS, GridSpec, parse_metric
from . import reporting


def _add_common_flags(p):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--n", type=int, help="spatial dimension")
    p.add_argument("--N", help="grid points per axis (comma list for studies)")
    p.add_argument("--scheme", choices=("spectral", "fd2", "fd4"))
    p.add_argument("--delta", help="twist label, e.g. 0.5,0")
    p.add_argument("--metric", help="metric descriptor")
    p.add_argument("--diffeo", help="diffeo descriptor")
    p.add_argument("--out", help="output directory")
    p.add_argument("--json", action="store_true", help="echo the JSON report to stdout")
    p.add_argument("--seed", type=int, help="probe-spinor RNG seed")
    p.add_argument("--probes", type=int, help="number of probe spinors")
    p.add_argument("--probe-band", type=int, dest="probe_band", help="max probe |mode|")
    p.add_argument("--spectrum-window", type=int, dest="spectrum_window")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _config_from_args(args):
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {
        "n": args.n,
        "N": args.N,
        "scheme": args.scheme,
        "delta": args.delta,
        "metric": args.metric,
        "diffeo": args.diffeo,
        "out": args.out,
        "seed": args.seed,
        "probes": args.probes,
        "probe_band": args.probe_band,
        "spectrum_window": args.spectrum_window,
    }
    if args.no_figures:
        overrides["figures"] = False
    cfg = build_config(file_values, overrides)
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg


def _echo(args, report):
    if args.json:
        print(json.dumps(reporting._jsonable(report), indent=2))


def _build_action(cfg, N, interpolate):
    grid = GridSpec(cfg.n, N, cfg.scheme)
    metric = parse_metric(cfg.metric, cfg.n).sample(grid)
    f = parse_diffeo(cfg.diffeo, cfg.n)
    return DiffeoAction(f, metric, cfg.label, interpolate=interpolate)


def _probe_set(cfg, gammas):
    rng = np.random.default_rng(cfg.seed)
    band = cfg.default_probe_band()
    return [
        random_band_limited(cfg.n, gammas.k, cfg.label, band, rng)
        for _ in range(max(1, cfg.probes))
    ]


def _action_metrics(cfg, N, probes):
    """One refinement row: residuals, unitarity defect, spectra drift, defects."""
    from .dirac import banded_hermiticity_defect

    interpolate = True
    act = _build_action(cfg, N, interpolate)
    d, dprime = act.dirac_in(), act.dirac_out()
    res_plus = equivariance_residual(dprime, act.unitary(1), d, probes)
    res_minus = equivariance_residual(dprime, act.unitary(-1), d, probes)
    sampled = [p.sample(act.grid) for p in probes]
    pairs = list(zip(sampled, sampled[1:] + sampled[:1]))
    unit = act.unitarity_defect(pairs)
    drift = spectra_distance(
        resolved_spectrum(d), resolved_spectrum(dprime), count=cfg.spectrum_window
    )
    band = max(1, min(cfg.N) // 4)
    herm_band = banded_hermiticity_defect(d, band)
    result = spectrum(d, metric_descriptor=cfg.metric)
    herm_raw = result.hermiticity_defect
    scale = float(np.abs(result.eigenvalues).max())
    return act, {
        "N": N,
        "residual_plus": res_plus,
        "residual_minus": res_minus,
        "unitarity_defect": unit,
        "spectra_distance": drift,
        "hermiticity_defect": herm_band,
        "hermiticity_defect_max": herm_raw,
        "hermiticity_defect_rel": herm_raw / scale if scale else 0.0,
    }


def _order_or_zero_pass(cfg, Ns, values, min_order):
    """A refinement column passes if it is identically tiny or decays fast."""
    values = np.asarray(values, dtype=float)
    if values.max() <= cfg.tolerances["tol_zero"]:
        return True, None
    order = reporting.fitted_order(Ns, values)
    return order >= min_order, order


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gammas(args):
    if args.n is None:
        raise ConfigError("gammas needs --n")
    G = build_gammas(args.n)
    report = {
        "n": G.n,
        "k": G.k,
        "gammas": [[[ [z.real, z.imag] for z in row] for row in g] for g in G.gammas],
    }
    print(json.dumps(report))
    if args.out:
        from pathlib import Path

        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        reporting.write_json(outdir / "gammas.json", report)
    return 0


def cmd_spectrum(args):
    cfg = _config_from_args(args)
    if len(cfg.N) != 1:
        raise ConfigError("spectrum runs a single N; use the convergence command for lists")
    grid = GridSpec(cfg.n, cfg.N[0], cfg.scheme)
    metric = parse_metric(cfg.metric, cfg.n).sample(grid)
    op = dirac_for_metric(metric, cfg.label)
    result = spectrum(op, metric_descriptor=cfg.metric)
    rows = [(i, float(v)) for i, v in enumerate(result.eigenvalues)]
    reporting.write_csv(cfg.out / "spectrum.csv", ("index", "eigenvalue"), rows)
    reporting.write_json(cfg.out / "spectrum.json", result.metadata)
    if cfg.figures:
        reporting.save_spectrum_figure(
            cfg.out / "spectrum.png", result.eigenvalues, result.metadata
        )
    _echo(args, result.metadata)
    return 0


def cmd_pullback(args):
    cfg = _config_from_args(args)
    if cfg.diffeo is None:
        raise ConfigError("pullback needs a diffeo descriptor")
    if len(cfg.N) != 1:
        raise ConfigError("pullback runs a single N")
    act = _build_action(cfg, cfg.N[0], interpolate=False)
    grid = act.grid
    R = act.rotation
    orth = float(np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(cfg.n)).max())
    report = {
        "n": cfg.n,
        "N": cfg.N[0],
        "metric": cfg.metric,
        "diffeo": cfg.diffeo,
        "delta_in": list(act.delta_in.twists),
        "delta_pulled": list(act.delta_out.twists),
        "twist_correction": list(act.lift.twist_correction),
        "pullback_descriptor": act.pullback.descriptor,
        "rotation_orthogonality_defect": orth,
    }
    header = ["i" + str(a + 1) for a in range(cfg.n)]
    comps = [(a, b) for a in range(cfg.n) for b in range(a, cfg.n)]
    header += [f"g{a + 1}{b + 1}" for a, b in comps]
    rows = []
    for idx in np.ndindex(*(grid.N,) * cfg.n):
        rows.append(list(idx) + [float(act.pullback.values[idx][a, b]) for a, b in comps])
    reporting.write_csv(cfg.out / "pullback.csv", header, rows)
    reporting.write_json(cfg.out / "pullback.json", report)
    if cfg.figures and cfg.n == 2:
        reporting.save_pullback_figure(cfg.out / "pullback.png", act.metric, act.pullback)
    _echo(args, report)
    return 0


def cmd_check_equivariance(args):
    cfg = _config_from_args(args)
    if cfg.diffeo is None:
        raise ConfigError("check-equivariance needs a diffeo descriptor")
    gammas = build_gammas(cfg.n)
    probes = _probe_set(cfg, gammas)
    rows = []
    act = None
    for N in cfg.N:
        act, row = _action_metrics(cfg, N, probes)
        rows.append(row)
    report = {
        "n": cfg.n,
        "scheme": cfg.scheme,
        "metric": cfg.metric,
        "diffeo": cfg.diffeo,
        "delta": list(act.delta_in.twists),
        "delta_pulled": list(act.delta_out.twists),
        "rows": rows,
    }
    tol = cfg.tolerances
    checks = ("residual_plus", "residual_minus", "unitarity_defect", "spectra_distance")
    if len(cfg.N) == 1:
        row = rows[0]
        report.update({k: row[k] for k in checks + ("hermiticity_defect",)})
        passed = (
            row["residual_plus"] <= tol["tol_residual"]
            and row["residual_minus"] <= tol["tol_residual"]
            and row["unitarity_defect"] <= tol["tol_unitarity"]
            and row["spectra_distance"] <= tol["tol_spectra"]
        )
    else:
        Ns = [row["N"] for row in rows]
        min_order = SCHEME_ORDERS.get(cfg.scheme, 0) - tol["order_margin"]
        passed = True
        orders = {}
        for key in ("residual_plus", "residual_minus", "spectra_distance"):
            ok, order = _order_or_zero_pass(cfg, Ns, [r[key] for r in rows], min_order)
            orders[key] = order
            if cfg.scheme == "spectral":
                ok = rows[-1][key] <= max(tol["tol_residual"], tol["tol_spectra"])
            passed = passed and ok
        report["fitted_orders"] = orders
    report["passed"] = bool(passed)
    reporting.write_json(cfg.out / "equivariance.json", report)
    if cfg.figures:
        if len(cfg.N) == 1:
            reporting.save_equivariance_figure(cfg.out / "equivariance.png", rows[0])
        else:
            reporting.save_convergence_figure(
                cfg.out / "equivariance.png",
                [r["N"] for r in rows],
                {k: [r[k] for r in rows] for k in checks},
            )
    _echo(args, report)
    return 0 if passed else 1


def cmd_two_lifts(args):
    cfg = _config_from_args(args)
    if len(cfg.N) != 1:
        raise ConfigError("two-lifts runs a single N")
    if cfg.diffeo is None:
        cfg.diffeo = "identity"
    act = _build_action(cfg, cfg.N[0], interpolate=True)
    probes = [p.sample(act.grid) for p in _probe_set(cfg, act.gammas)]
    u_plus, u_minus = act.unitary(1), act.unitary(-1)
    sign_defect = max(
        float(np.abs((u_plus.apply(p) + u_minus.apply(p)).values).max()) for p in probes
    )
    pairs = list(zip(probes, probes[1:] + probes[:1]))
    report = {
        "n": cfg.n,
        "N": cfg.N[0],
        "metric": cfg.metric,
        "diffeo": cfg.diffeo,
        "delta": list(act.delta_in.twists),
        "delta_pulled": list(act.delta_out.twists),
        "twist_correction": list(act.lift.twist_correction),
        "u_minus_plus_u_plus_max": sign_defect,
        "unitarity_defect": act.unitarity_defect(pairs),
    }
    tol = cfg.tolerances
    passed = (
        sign_defect <= tol["tol_zero"]
        and (not act.f.is_affine or report["unitarity_defect"] <= tol["tol_unitarity"])
    )
    report["passed"] = bool(passed)
    reporting.write_json(cfg.out / "two_lifts.json", report)
    _echo(args, report)
    return 0 if passed else 1


def cmd_convergence(args):
    cfg = _config_from_args(args)
    if cfg.diffeo is None:
        raise ConfigError("convergence needs a diffeo descriptor")
    if len(cfg.N) < 2:
        raise ConfigError("convergence needs an N list, e.g. --N 8,16,32")
    gammas = build_gammas(cfg.n)
    probes = _probe_set(cfg, gammas)
    rows = []
    for N in cfg.N:
        _, row = _action_metrics(cfg, N, probes)
        row["residual"] = max(row.pop("residual_plus"), row.pop("residual_minus"))
        row["spectrum_drift"] = row.pop("spectra_distance")
        rows.append(row)
    header = (
        "N",
        "residual",
        "hermiticity_defect",
        "hermiticity_defect_max",
        "hermiticity_defect_rel",
        "spectrum_drift",
    )
    reporting.write_csv(
        cfg.out / "convergence.csv",
        header,
        [[r["N"]] + [float(r[k]) for k in header[1:]] for r in rows],
    )
    Ns = [r["N"] for r in rows]
    tol = cfg.tolerances
    min_order = SCHEME_ORDERS.get(cfg.scheme, 0) - tol["order_margin"]
    orders = {}
    passed = True
    for key in ("residual", "hermiticity_defect", "spectrum_drift"):
        ok, order = _order_or_zero_pass(cfg, Ns, [r[key] for r in rows], min_order)
        orders[key] = order
        if cfg.scheme == "spectral":
            ok = rows[-1][key] <= max(tol["tol_residual"], tol["tol_spectra"])
        passed = passed and ok
    report = {
        "n": cfg.n,
        "scheme": cfg.scheme,
        "metric": cfg.metric,
        "diffeo": cfg.diffeo,
        "delta": list(cfg.label.twists),
        "rows": rows,
        "fitted_orders": orders,
        "passed": bool(passed),
    }
    reporting.write_json(cfg.out / "convergence.json", report)
    if cfg.figures:
        reporting.save_convergence_figure(
            cfg.out / "convergence.png",
            Ns,
            {k: [r[k] for r in rows] for k in ("residual", "hermiticity_defect", "spectrum_drift")},
        )
    _echo(args, report)
    return 0 if passed else 1


def make_parser():
    parser = argparse.ArgumentParser(
        prog="spintorus",
        description="Dirac operators, spin structures, and diffeomorphism lifts on flat tori",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("gammas", cmd_gammas, "print the gamma matrices as JSON"),
        ("spectrum", cmd_spectrum, "compute and write a Dirac spectrum"),
        ("pullback", cmd_pullback, "pull a metric and twist label back along a diffeo"),
        ("check-equivariance", cmd_check_equivariance, "verify D' U = U D"),
        ("two-lifts", cmd_two_lifts, "exercise the two lifts U+ and U-"),
        ("convergence", cmd_convergence, "refinement study over an N list"),
    )
    for name, fn, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
        p.set_defaults(handler=fn)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SpinTorusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
