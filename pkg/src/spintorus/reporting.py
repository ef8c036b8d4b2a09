"""CSV/JSON writers and figure rendering for the CLI report paths.

All floating output is printed with 17 significant digits so results can be
compared across implementations; identical configs produce byte-identical
CSV.  Figures are rendered to PNG next to the delimited output.
"""

import json
from pathlib import Path

import numpy as np


def format_float(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(format_float(v) if isinstance(v, float) else str(v) for v in row)
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def write_json(path, data):
    Path(path).write_text(json.dumps(_jsonable(data), indent=2) + "\n")


def fitted_order(Ns, errors, floor=1e-14):
    """Least-squares slope of log(error) against log(h); zeros are floored."""
    errs = np.maximum(np.asarray(errors, dtype=float), floor)
    hs = 1.0 / np.asarray(Ns, dtype=float)
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def _axes(title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=130)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    import matplotlib.pyplot as plt

    plt.close(fig)


def save_spectrum_figure(path, eigenvalues, meta):
    fig, ax = _axes(
        f"Dirac spectrum  (n={meta['n']}, N={meta['N']}, {meta['scheme']}, "
        f"delta={','.join(str(t) for t in meta['delta'])})"
    )
    eigs = np.asarray(eigenvalues)
    ax.plot(np.arange(len(eigs)), eigs, ".", markersize=3)
    ax.axhline(0.0, color="k", linewidth=0.6)
    ax.set_xlabel("index (ascending)")
    ax.set_ylabel("eigenvalue")
    _save(fig, path)


def save_equivariance_figure(path, report):
    fig, ax = _axes("Equivariance and unitarity defects")
    keys = ["residual_plus", "residual_minus", "unitarity_defect", "spectra_distance"]
    vals = [max(report[k], 1e-17) for k in keys]
    ax.bar(range(len(keys)), vals, color="#336699")
    ax.set_yscale("log")
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(keys, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("defect")
    _save(fig, path)


def save_convergence_figure(path, Ns, columns):
    """columns: mapping name -> error sequence over Ns."""
    fig, ax = _axes("Refinement study")
    hs = 1.0 / np.asarray(Ns, dtype=float)
    for name, errs in columns.items():
        errs = np.maximum(np.asarray(errs, dtype=float), 1e-17)
        ax.loglog(hs, errs, "o-", label=name)
    ax.set_xlabel("h = 1/N")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    _save(fig, path)


def save_pullback_figure(path, metric, pullback):
    """Component heatmaps of g and f*g (2-torus only)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 3, figsize=(9.0, 5.0), dpi=130)
    comps = [(0, 0), (0, 1), (1, 1)]
    for row, (name, field) in enumerate((("g", metric), ("f*g", pullback))):
        for col, (a, b) in enumerate(comps):
            ax = axes[row][col]
            im = ax.imshow(field.values[..., a, b].T, origin="lower", cmap="viridis")
            ax.set_title(f"{name}[{a + 1}{b + 1}]", fontsize=9)
            fig.colorbar(im, ax=ax, shrink=0.8)
    _save(fig, path)
