import numpy as np
import pytest

from spintorus.clifford import build_gammas
from spintorus.dirac import (
    assemble_dirac,
    banded_hermiticity_defect,
    count_zero_modes,
    dirac_for_metric,
    low_window,
    multiplicities,
    plane_wave_spectrum,
    resolved_spectrum,
    spectra_distance,
    spectrum,
)
from spintorus.errors import SizeCapError, SpinStructureMismatchError, WiringError
from spintorus.fields import (
    DiscreteSpinorField,
    SpinStructureLabel,
    all_labels,
    random_spinor_field,
)
from spintorus.geometry import GridSpec, build_connection, orthonormal_frame, parse_metric


def flat_dirac(n, N, delta, scheme="spectral"):
    grid = GridSpec(n, N, scheme)
    metric = parse_metric("flat", n).sample(grid)
    return dirac_for_metric(metric, delta)


def test_constant_spinor_is_a_zero_mode_of_the_flat_operator():
    lab = SpinStructureLabel.zero(2)
    op = flat_dirac(2, 8, lab)
    vals = np.zeros((8, 8, 2), dtype=complex)
    vals[..., 0] = 1.0
    out = op.apply(DiscreteSpinorField(op.grid, lab, vals))
    assert np.abs(out.values).max() < 1e-13


def test_plane_wave_action_matches_symbol_and_dense_matrix():
    # With the Hermitian convention (global -i), a plane wave with mode m is
    # mapped to 2 pi sum_j gamma_j m_j acting on the component vector.
    lab = SpinStructureLabel.zero(2)
    op = flat_dirac(2, 16, lab)
    G = op.gammas
    grid = op.grid
    x = grid.points()
    m = np.array([2.0, -3.0])
    v = np.array([0.3 + 0.1j, -0.7 + 0.2j])
    wave = np.exp(2j * np.pi * (x @ m))
    psi = DiscreteSpinorField(grid, lab, wave[..., None] * v)
    out = op.apply(psi)
    symbol = 2 * np.pi * (m[0] * G.gammas[0] + m[1] * G.gammas[1])
    expect = wave[..., None] * (symbol @ v)
    assert np.abs(out.values - expect).max() < 1e-10
    # matrix-free apply agrees with the dense materialization
    rng = np.random.default_rng(0)
    raw = random_spinor_field(grid, 2, lab, rng)
    dense = op.dense()
    via_dense = (dense @ raw.values.reshape(-1)).reshape(raw.values.shape)
    assert np.abs(op.apply(raw).values - via_dense).max() < 1e-11


def test_apply_is_linear():
    lab = SpinStructureLabel((0.5, 0.5))
    op = flat_dirac(2, 8, lab)
    rng = np.random.default_rng(1)
    a, b = random_spinor_field(op.grid, 2, lab, rng), random_spinor_field(op.grid, 2, lab, rng)
    z = 1.3 - 0.4j
    lhs = op.apply(z * a + b).values
    rhs = z * op.apply(a).values + op.apply(b).values
    assert np.abs(lhs - rhs).max() < 1e-12


def test_apply_rejects_mismatched_fields():
    lab = SpinStructureLabel.zero(2)
    op = flat_dirac(2, 8, lab)
    rng = np.random.default_rng(2)
    wrong_label = random_spinor_field(op.grid, 2, SpinStructureLabel((0.5, 0.0)), rng)
    with pytest.raises(SpinStructureMismatchError):
        op.apply(wrong_label)
    wrong_grid = random_spinor_field(GridSpec(2, 16), 2, lab, rng)
    with pytest.raises(WiringError):
        op.apply(wrong_grid)


def test_flat_circle_spectrum_is_two_pi_times_integers():
    op = flat_dirac(1, 8, SpinStructureLabel.zero(1))
    res = spectrum(op)
    expect = np.sort(2 * np.pi * np.arange(-4, 4))
    assert np.abs(res.eigenvalues - expect).max() < 1e-12
    assert res.hermiticity_defect < 1e-13


@pytest.mark.parametrize("label_bits", [(0, 0), (1, 0), (0, 1), (1, 1)])
def test_flat_torus_spectrum_matches_plane_wave_oracle(label_bits):
    lab = SpinStructureLabel.from_bits(label_bits)
    op = flat_dirac(2, 16, lab)
    res = spectrum(op)
    oracle = plane_wave_spectrum(2, 16, lab)
    assert np.abs(res.eigenvalues - oracle).max() < 1e-10
    assert res.hermiticity_defect < 1e-13
    zeros = count_zero_modes(res.eigenvalues)
    assert zeros == (2 if label_bits == (0, 0) else 0)
    # chirality pairing on the even-dimensional flat torus
    assert np.abs(np.sort(-res.eigenvalues) - res.eigenvalues).max() < 1e-10


def test_flat_circle_spectra_all_twists():
    for lab in all_labels(1):
        op = flat_dirac(1, 8, lab)
        res = spectrum(op)
        assert np.abs(res.eigenvalues - plane_wave_spectrum(1, 8, lab)).max() < 1e-10


def test_flat_three_torus_spectra_all_twists():
    grid = GridSpec(3, 8)
    met = parse_metric("flat", 3).sample(grid)
    for lab in all_labels(3):
        res = spectrum(dirac_for_metric(met, lab))
        oracle = plane_wave_spectrum(3, 8, lab)
        assert np.abs(res.eigenvalues - oracle).max() < 1e-10


def test_flat_four_torus_spectrum_matches_oracle():
    # k = 4 components; exercises the tensor-recursion gammas end to end.
    lab = SpinStructureLabel((0.5, 0.0, 0.0, 0.5))
    op = flat_dirac(4, 4, lab)
    res = spectrum(op)
    oracle = plane_wave_spectrum(4, 4, lab)
    assert np.abs(res.eigenvalues - oracle).max() < 1e-10
    assert res.hermiticity_defect < 1e-13


def test_constant_metric_spectrum_matches_anisotropic_oracle():
    G = np.array([[1.0, 1.0], [1.0, 2.0]])
    lab = SpinStructureLabel((0.5, 0.5))
    grid = GridSpec(2, 16)
    met = parse_metric("constant(1,1,2)", 2).sample(grid)
    op = dirac_for_metric(met, lab)
    res = spectrum(op)
    oracle = plane_wave_spectrum(2, 16, lab, metric_matrix=G)
    assert np.abs(res.eigenvalues - oracle).max() < 1e-10
    assert res.hermiticity_defect < 1e-13


def test_constant_metric_operator_commutes_with_grid_translations():
    from spintorus.diffeo import AffineDiffeo, lift_unitary

    grid = GridSpec(2, 4)
    met = parse_metric("constant(1,1,2)", 2).sample(grid)
    lab = SpinStructureLabel((0.5, 0.0))
    op = dirac_for_metric(met, lab)
    D = op.dense()
    for axis in range(2):
        shift = np.zeros(2)
        shift[axis] = 1 / 4
        u = lift_unitary(AffineDiffeo(np.eye(2, dtype=int), shift), met, lab)
        T = u.as_matrix()
        assert np.abs(D @ T - T @ D).max() < 1e-12


def test_size_cap():
    op = flat_dirac(2, 16, SpinStructureLabel.zero(2))
    with pytest.raises(SizeCapError):
        op.dense(cap=100)


def test_fd4_flat_resolved_spectrum_matches_symbol_oracle():
    # Independent oracle: the FD4 operator diagonalizes on plane waves with
    # symbol s(kappa) = (8 sin(2 pi kappa h) - sin(4 pi kappa h)) / (6h); the
    # resolved filter must keep exactly the |m + delta|_inf <= N/4 branch.
    N = 16
    lab = SpinStructureLabel((0.5, 0.0))
    op = flat_dirac(2, N, lab, scheme="fd4")
    got = resolved_spectrum(op)
    h = 1.0 / N

    def sym(kappa):
        return (8 * np.sin(2 * np.pi * kappa * h) - np.sin(4 * np.pi * kappa * h)) / (6 * h)

    modes = np.fft.fftfreq(N, d=h)
    expect = []
    for m1 in modes:
        for m2 in modes:
            k1, k2 = m1 + 0.5, m2
            if max(abs(k1), abs(k2)) > N / 4:
                continue
            lam = np.hypot(sym(k1), sym(k2))
            expect.extend([lam, -lam])
    expect = np.sort(expect)
    assert len(got) == len(expect)
    assert np.abs(got - expect).max() < 1e-10


def test_banded_defect_zero_for_flat_fd_schemes():
    for scheme in ("fd2", "fd4"):
        op = flat_dirac(2, 8, SpinStructureLabel.zero(2), scheme=scheme)
        assert spectrum(op).hermiticity_defect < 1e-13
        assert banded_hermiticity_defect(op, 2) < 1e-13


def test_spectra_distance_and_windows():
    e1 = np.array([-5.0, -1.0, -1.0, 1.0, 1.0, 5.0])
    e2 = np.array([-5.0, -1.0, -1.0, 1.0, 1.0, 7.0])
    assert spectra_distance(e1, e2, count=4) == 0.0
    assert spectra_distance(e1, e2, count=6) == 2.0
    # window expansion must not split the degenerate quadruple
    w = low_window(e1, 3)
    assert len(w) == 4
    assert multiplicities(np.array([0.0, 0.0, 1.0, 1.0 + 5e-9, 2.0])) == [
        (0.0, 2),
        (pytest.approx(1.0, abs=1e-8), 2),
        (2.0, 1),
    ]


def test_assemble_wiring_checks():
    grid = GridSpec(2, 8)
    met = parse_metric("flat", 2).sample(grid)
    frame = orthonormal_frame(met)
    conn = build_connection(met, frame)
    with pytest.raises(WiringError):
        assemble_dirac(frame, conn, build_gammas(3), SpinStructureLabel.zero(2))
    with pytest.raises(SpinStructureMismatchError):
        assemble_dirac(frame, conn, build_gammas(2), SpinStructureLabel.zero(3))


def test_spectrum_is_deterministic_across_runs():
    lab = SpinStructureLabel((0.5, 0.5))
    a = spectrum(flat_dirac(2, 8, lab)).eigenvalues
    b = spectrum(flat_dirac(2, 8, lab)).eigenvalues
    assert np.array_equal(a, b)
