import json

import numpy as np
import pytest

from spintorus.cli import main


def run(args):
    return main(args)


def read_json(path):
    return json.loads(path.read_text())


def read_spectrum_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "index,eigenvalue"
    return np.array([float(line.split(",")[1]) for line in lines[1:]])


def test_gammas_prints_json(capsys):
    assert run(["gammas", "--n", "3"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["n"] == 3 and data["k"] == 2
    assert len(data["gammas"]) == 3
    g3 = np.array([[c[0] + 1j * c[1] for c in row] for row in data["gammas"][2]])
    assert np.array_equal(g3, np.diag([1.0 + 0j, -1.0]))


def test_spectrum_flat_zero_modes(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["spectrum", "--n", "2", "--N", "16", "--delta", "0,0", "--metric", "flat",
         "--out", str(out), "--no-figures"]
    ) == 0
    eigs = read_spectrum_csv(out / "spectrum.csv")
    assert len(eigs) == 512
    smallest = np.sort(np.abs(eigs))[:3]
    assert smallest[0] < 1e-10 and smallest[1] < 1e-10 and smallest[2] > 1e-3
    meta = read_json(out / "spectrum.json")
    assert meta["hermiticity_defect"] < 1e-13
    assert not (out / "spectrum.png").exists()


def test_spectrum_antiperiodic_gap_and_figure(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["spectrum", "--n", "2", "--N", "16", "--delta", "0.5,0.5", "--metric", "flat",
         "--out", str(out)]
    ) == 0
    eigs = read_spectrum_csv(out / "spectrum.csv")
    assert abs(np.abs(eigs).min() - 4.442882938) < 1e-9  # pi * sqrt(2)
    assert (out / "spectrum.png").stat().st_size > 0


def test_spectrum_constant_metric_matches_oracle(tmp_path):
    from spintorus.dirac import plane_wave_spectrum
    from spintorus.fields import SpinStructureLabel

    out = tmp_path / "r"
    assert run(
        ["spectrum", "--n", "2", "--N", "16", "--delta", "0.5,0.5",
         "--metric", "constant(1,1,2)", "--out", str(out), "--no-figures"]
    ) == 0
    eigs = read_spectrum_csv(out / "spectrum.csv")
    oracle = plane_wave_spectrum(
        2, 16, SpinStructureLabel((0.5, 0.5)), metric_matrix=[[1.0, 1.0], [1.0, 2.0]]
    )
    assert np.abs(eigs - oracle).max() < 1e-10


def test_pullback_command(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["pullback", "--n", "2", "--N", "8", "--delta", "0.5,0", "--metric", "flat",
         "--diffeo", "affine(1,1,0,1,0,0)", "--out", str(out)]
    ) == 0
    rep = read_json(out / "pullback.json")
    assert rep["delta_pulled"] == [0.5, 0.5]
    assert rep["twist_correction"] == [0, 0]
    assert rep["rotation_orthogonality_defect"] < 1e-10
    lines = (out / "pullback.csv").read_text().splitlines()
    assert lines[0] == "i1,i2,g11,g12,g22"
    assert len(lines) == 65
    first = [float(tok) for tok in lines[1].split(",")]
    assert first[2:] == [1.0, 1.0, 2.0]  # f*flat = A^T A for the shear
    assert (out / "pullback.png").stat().st_size > 0


def test_check_equivariance_identity(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["check-equivariance", "--n", "2", "--N", "12", "--delta", "0.5,0",
         "--metric", "conformal(0.1,1,0)", "--diffeo", "identity",
         "--out", str(out), "--no-figures"]
    ) == 0
    rep = read_json(out / "equivariance.json")
    assert rep["passed"] is True
    for key in ("residual_plus", "residual_minus", "unitarity_defect", "spectra_distance"):
        assert rep[key] < 1e-12


def test_check_equivariance_affine_shear(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["check-equivariance", "--n", "2", "--N", "16", "--delta", "0.5,0",
         "--metric", "flat", "--diffeo", "affine(1,1,0,1,0,0)", "--out", str(out)]
    ) == 0
    rep = read_json(out / "equivariance.json")
    assert rep["delta_pulled"] == [0.5, 0.5]
    assert rep["residual_plus"] <= 1e-10 and rep["residual_minus"] <= 1e-10
    assert rep["spectra_distance"] <= 1e-10
    assert (out / "equivariance.png").stat().st_size > 0


def test_check_equivariance_smooth_refinement(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["check-equivariance", "--n", "2", "--N", "8,16", "--scheme", "fd2",
         "--delta", "0.5,0", "--metric", "conformal(0.1,1,0)",
         "--diffeo", "smooth_shear(1,2,0.05,1)", "--out", str(out), "--no-figures"]
    ) == 0
    rep = read_json(out / "equivariance.json")
    assert len(rep["rows"]) == 2
    assert rep["fitted_orders"]["residual_plus"] >= 1.5
    assert rep["passed"] is True


def test_check_equivariance_translation_on_curved_metric(tmp_path):
    # Translations lie in the identity component: labels fixed, spectra equal,
    # and the discrete intertwining is exact for any scheme.
    out = tmp_path / "r"
    assert run(
        ["check-equivariance", "--n", "2", "--N", "12", "--scheme", "fd4",
         "--delta", "0,0.5", "--metric", "diag_wave(2,0.2,1)",
         "--diffeo", "affine(1,0,0,1,0.25,0)", "--out", str(out), "--no-figures"]
    ) == 0
    rep = read_json(out / "equivariance.json")
    assert rep["delta_pulled"] == [0.0, 0.5]
    assert rep["residual_plus"] < 1e-12
    assert rep["spectra_distance"] < 1e-10


def test_convergence_flat_affine_rows_are_zero(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["convergence", "--n", "2", "--N", "8,16", "--delta", "0.5,0",
         "--metric", "flat", "--diffeo", "affine(1,1,0,1,0,0)",
         "--out", str(out), "--no-figures"]
    ) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == (
        "N,residual,hermiticity_defect,hermiticity_defect_max,"
        "hermiticity_defect_rel,spectrum_drift"
    )
    for line in lines[1:]:
        vals = [float(tok) for tok in line.split(",")[1:]]
        assert max(vals) <= 1e-12
    rep = read_json(out / "convergence.json")
    assert rep["passed"] is True


def test_convergence_requires_diffeo_and_n_list(tmp_path):
    out = tmp_path / "r"
    assert run(["convergence", "--n", "2", "--N", "8,16", "--out", str(out)]) == 2
    assert run(
        ["convergence", "--n", "2", "--N", "8", "--diffeo", "identity", "--out", str(out)]
    ) == 2


def test_two_lifts_command(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["two-lifts", "--n", "2", "--N", "8", "--delta", "0.5,0",
         "--metric", "constant(1,1,2)", "--diffeo", "affine(1,1,0,1,0,0)",
         "--out", str(out)]
    ) == 0
    rep = read_json(out / "two_lifts.json")
    assert rep["u_minus_plus_u_plus_max"] == 0.0
    assert rep["unitarity_defect"] < 1e-12
    assert rep["delta_pulled"] == [0.5, 0.5]


def test_config_file_with_flag_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# demo config\n"
        "n = 2\n"
        "N = 16\n"
        "delta = 0,0\n"
        "metric = flat\n"
        f"out = {tmp_path / 'a'}\n"
    )
    assert run(["spectrum", "--config", str(cfg), "--delta", "0.5,0.5", "--no-figures"]) == 0
    meta = read_json(tmp_path / "a" / "spectrum.json")
    assert meta["delta"] == [0.5, 0.5]  # flag wins over the file


@pytest.mark.parametrize(
    "cfg_text,fragment",
    [
        ("n == 2\n", "cannot parse"),
        ("banana = 3\n", "unknown config key"),
        ("n = 2\nN = 15\n", "even"),
        ("n = 2\nN = 16\nmetric = constant(1,2)\n", "constant"),
        ("n = 2\nN = 16\ndelta = 0.3,0\n", "delta"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, cfg_text, fragment):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(cfg_text)
    assert run(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert fragment in capsys.readouterr().err


def test_runs_are_byte_identical(tmp_path):
    args = ["check-equivariance", "--n", "2", "--N", "12", "--delta", "0.5,0",
            "--metric", "conformal(0.1,1,0)", "--diffeo", "affine(1,1,0,1,0,0)",
            "--seed", "77", "--no-figures"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "equivariance.json").read_bytes()
    b = (tmp_path / "b" / "equivariance.json").read_bytes()
    assert a == b
    sargs = ["spectrum", "--n", "2", "--N", "12", "--delta", "0.5,0.5",
             "--metric", "diag_wave(2,0.2,1)", "--no-figures"]
    assert run(sargs + ["--out", str(tmp_path / "c")]) == 0
    assert run(sargs + ["--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "c" / "spectrum.csv").read_bytes() == (
        tmp_path / "d" / "spectrum.csv"
    ).read_bytes()


def test_csv_floats_round_trip_at_full_precision(tmp_path):
    out = tmp_path / "r"
    assert run(
        ["spectrum", "--n", "1", "--N", "8", "--delta", "0.5", "--metric", "flat",
         "--out", str(out), "--no-figures"]
    ) == 0
    lines = (out / "spectrum.csv").read_text().splitlines()[1:]
    values = []
    for line in lines:
        text = line.split(",")[1]
        # 17 significant digits: the printed text reproduces the double exactly
        assert format(float(text), ".17g") == text
        values.append(float(text))
    assert abs(values[4] - np.pi) < 1e-13
