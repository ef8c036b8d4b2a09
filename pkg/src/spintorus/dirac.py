"""Discretized Dirac operator on twisted spinor fields and its spectrum.

The operator acts on components in the canonical spinor frame as

    (D psi)(x) = -i sum_j g_j [ sum_a E^a_j(x) d_a psi(x)
                                + (1/4) sum_{kl} Gamma_jkl(x) g_k g_l psi(x) ],

with the twisted derivative of the field's spin structure per axis.  The
gamma matrices here are Hermitian with square +1; the overall -i makes the
operator symmetric for the volume-weighted inner product (a global unitary
convention: without it the same formula is skew-symmetric and the spectrum
sits on the imaginary axis).
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .clifford import build_gammas
from .errors import GridError, SizeCapError, SpinStructureMismatchError, WiringError
from .fields import DiscreteSpinorField, SpinStructureLabel
from .geometry import discrete_derivative

DEFAULT_DENSE_CAP = 8192


@dataclass(eq=False)
class DiracOperator:
    """Matrix-free Dirac operator for one (metric, spin structure) pair."""

    grid: object
    gammas: object
    delta: SpinStructureLabel
    frame: object
    conn: object

    def __post_init__(self):
        n = self.grid.n
        E = self.frame.E
        G = self.gammas.gammas
        # G_a(x) = sum_j E^a_j(x) g_j, the coefficient of d_a.
        self._coef = np.einsum("...aj,jcd->...acd", E, G)
        # Pointwise connection matrix (1/4) sum_jkl Gamma_jkl g_j g_k g_l.
        triple = np.einsum("jab,kbc,lcd->jklad", G, G, G)
        self._connmat = 0.25 * np.einsum("...jkl,jklad->...ad", self.conn.Gamma, triple)
        self._dense = None

    @property
    def size(self):
        return self.gammas.k * self.grid.npoints

    def apply_values(self, values):
        out = np.einsum("...cd,...d->...c", self._connmat, values).astype(complex)
        for a in range(self.grid.n):
            dv = discrete_derivative(values, axis=a, grid=self.grid, twist=self.delta.twists[a])
            out += np.einsum("...cd,...d->...c", self._coef[..., a, :, :], dv)
        return -1j * out

    def apply(self, field):
        if field.grid != self.grid:
            raise WiringError("field grid does not match the operator grid")
        if field.delta != self.delta:
            raise SpinStructureMismatchError(
                f"operator is built for delta={self.delta}, field carries {field.delta}"
            )
        return DiscreteSpinorField(self.grid, self.delta, self.apply_values(field.values))

    def _axis_matrix(self, a):
        """Dense one-axis twisted derivative matrix (N x N)."""
        N = self.grid.N
        return discrete_derivative(
            np.eye(N, dtype=complex), axis=0, grid=self.grid, twist=self.delta.twists[a]
        )

    def dense(self, cap=DEFAULT_DENSE_CAP):
        """Materialized matrix, row-major over (x_1, ..., x_n, component)."""
        if self._dense is not None:
            return self._dense
        M = self.size
        if M > cap:
            raise SizeCapError(
                f"dense operator would be {M} x {M} (cap {cap}); use a smaller N"
            )
        n, N, k = self.grid.n, self.grid.N, self.gammas.k
        X = self.grid.npoints
        coef = self._coef.reshape(X, n, k, k)
        dense4 = np.zeros((X, k, X, k), dtype=complex)
        for a in range(n):
            D1 = self._axis_matrix(a)
            Dfull = reduce(
                np.kron,
                [np.eye(N**a), D1, np.eye(N ** (n - 1 - a))],
            )
            dense4 += np.einsum("xcd,xy->xcyd", coef[:, a], Dfull)
        idx = np.arange(X)
        dense4[idx, :, idx, :] += self._connmat.reshape(X, k, k)
        self._dense = -1j * dense4.reshape(M, M)
        return self._dense

    def vol_weights(self):
        """Volume weights per dense row (vol(x) repeated over components)."""
        return np.repeat(self.conn.vol.reshape(-1), self.gammas.k)


def assemble_dirac(frame, conn, gammas, delta):
    """Assemble the Dirac operator from frame, connection, and twist data."""
    if frame.grid != conn.grid:
        raise GridError("frame and connection live on different grids")
    if gammas.n != frame.grid.n:
        raise WiringError(
            f"gamma set is for n={gammas.n} but the grid has n={frame.grid.n}"
        )
    if delta.n != frame.grid.n:
        raise SpinStructureMismatchError("twist label length does not match the grid")
    return DiracOperator(frame.grid, gammas, delta, frame, conn)


def dirac_for_metric(metric, delta, gammas=None):
    """Convenience: frame + connection + operator for a sampled metric."""
    from .geometry import build_connection, orthonormal_frame

    gammas = gammas if gammas is not None else build_gammas(metric.grid.n)
    frame = orthonormal_frame(metric)
    conn = build_connection(metric, frame)
    return assemble_dirac(frame, conn, gammas, delta)


@dataclass(eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    hermiticity_defect: float
    metadata: dict


def weighted_matrix(op, cap=DEFAULT_DENSE_CAP):
    """B = W^(1/2) D W^(-1/2), the similarity transform that is Hermitian
    exactly when D is symmetric for the volume-weighted inner product."""
    A = op.dense(cap)
    s = np.sqrt(op.vol_weights())
    return A * (s[:, None] / s[None, :])


def spectrum(op, cap=DEFAULT_DENSE_CAP, metric_descriptor=None):
    """Eigenvalues of (B + B^dagger)/2 in ascending order.

    The max-entry Hermiticity defect |B - B^dagger| is reported alongside;
    it is exactly zero for flat and constant metrics with the spectral
    scheme and is a discretization diagnostic otherwise.
    """
    B = weighted_matrix(op, cap)
    defect = float(np.abs(B - B.conj().T).max())
    H = 0.5 * (B + B.conj().T)
    eigs = np.linalg.eigvalsh(H)
    meta = {
        "n": op.grid.n,
        "N": op.grid.N,
        "scheme": op.grid.scheme,
        "delta": list(op.delta.twists),
        "metric": metric_descriptor,
        "hermiticity_defect": defect,
        "size": op.size,
    }
    return SpectrumResult(np.sort(eigs), defect, meta)


def banded_hermiticity_defect(op, max_mode, cap=DEFAULT_DENSE_CAP):
    """Hermiticity defect restricted to the resolved plane-wave band.

    2-norm of V^dagger (B - B^dagger) V where the columns of V are the
    orthonormalized twisted plane waves with |m_a| <= max_mode.  The raw
    max-entry defect does not decay under refinement for curved metrics (the
    near-diagonal entries are O(1) and only annihilate smooth vectors); this
    band-restricted form decays at the scheme order on the fixed subspace.
    """
    from .fields import mode_box

    B = weighted_matrix(op, cap)
    defect = B - B.conj().T
    grid, k = op.grid, op.gammas.k
    pts = grid.points().reshape(-1, grid.n)
    freq = mode_box(grid.n, max_mode) + np.array(op.delta.twists)
    waves = np.exp(2j * np.pi * pts @ freq.T) / np.sqrt(grid.npoints)  # (X, M)
    V = np.einsum("xm,ck->xcmk", waves, np.eye(k)).reshape(B.shape[0], -1)
    return float(np.linalg.norm(V.conj().T @ defect @ V, 2))


def resolved_spectrum(op, band=None, cluster_gap=1e-8, cap=DEFAULT_DENSE_CAP):
    """Eigenvalues of the resolved (doubler-free) part of the spectrum.

    Central-difference schemes carry spurious doubler branches (the FD
    symbol returns to small values near the band edge); their eigenvalues
    interleave with the low physical shells but are not diffeomorphism-
    covariant.  Eigenvalues are grouped into clusters (gap threshold), and
    each cluster keeps as many entries as the trace of the resolved-band
    Fourier projector restricted to its eigenspace (|m + delta|_inf <= band,
    default N//4).  The trace is basis-invariant, so exactly degenerate
    physical/doubler shells are counted correctly even though the
    eigensolver mixes their vectors.  The spectral scheme has no doublers
    and is returned unfiltered.
    """
    B = weighted_matrix(op, cap)
    H = 0.5 * (B + B.conj().T)
    eigs, vecs = np.linalg.eigh(H)
    if op.grid.scheme == "spectral":
        return np.sort(eigs)
    grid, k = op.grid, op.gammas.k
    n, N = grid.n, grid.N
    band = band if band is not None else N // 4
    shaped = vecs.T.reshape(-1, *(N,) * n, k)
    # Demodulate the twists so FFT bin m carries the field mode m + delta;
    # without this a pure twisted wave leaks across every integer bin.
    demod = np.exp(-2j * np.pi * (grid.points() @ np.array(op.delta.twists)))
    coeffs = np.fft.fftn(shaped * demod[..., None], axes=tuple(range(1, n + 1)))
    power = np.abs(coeffs) ** 2
    modes = np.fft.fftfreq(N, d=1.0 / N)
    inside = np.ones((N,) * n, dtype=bool)
    for a in range(n):
        ax_in = np.abs(modes + op.delta.twists[a]) <= band
        shape = [1] * n
        shape[a] = N
        inside &= ax_in.reshape(shape)
    total = power.reshape(power.shape[0], -1).sum(axis=1)
    frac = power[:, inside, :].reshape(power.shape[0], -1).sum(axis=1) / total

    kept = []
    start = 0
    for i in range(1, len(eigs) + 1):
        if i == len(eigs) or eigs[i] - eigs[i - 1] > cluster_gap:
            count = int(round(frac[start:i].sum()))
            if count > 0:
                block = eigs[start:i]
                order = np.argsort(frac[start:i])[::-1]
                kept.extend(block[order[: min(count, len(block))]])
            start = i
    return np.sort(np.array(kept))


def plane_wave_spectrum(n, N, delta, metric_matrix=None, gammas=None):
    """Analytic spectrum of the discretized operator for a constant metric.

    Independent oracle: plane waves exp(2 pi i (m+delta).x) v diagonalize the
    operator; on each mode the symbol sum_j g_j w_j with w = E^T 2pi(m+delta)
    has eigenvalues +-|w| (k/2 each; the single signed value w for k = 1),
    and |w|^2 = (2pi)^2 (m+delta)^T G^{-1} (m+delta).  Modes run over the
    FFT band {-N/2, ..., N/2 - 1} per axis.
    """
    gammas = gammas if gammas is not None else build_gammas(n)
    k = gammas.k
    if metric_matrix is None:
        E = np.eye(n)
    else:
        E = np.linalg.cholesky(np.linalg.inv(np.asarray(metric_matrix, dtype=float)))
    modes = np.fft.fftfreq(N, d=1.0 / N)
    mesh = np.stack(np.meshgrid(*([modes] * n), indexing="ij"), axis=-1).reshape(-1, n)
    kappa = 2 * np.pi * (mesh + np.array(delta.twists))
    w = kappa @ E
    if k == 1:
        eigs = w[:, 0]
    else:
        norms = np.linalg.norm(w, axis=-1)
        eigs = np.concatenate([np.repeat(norms, k // 2), np.repeat(-norms, k // 2)])
    return np.sort(eigs)


def _window_count(eigs, target, gap_tol):
    """Smallest count >= target at which |eigenvalue| has a gap."""
    mags = np.sort(np.abs(eigs))
    c = min(target, len(mags))
    while c < len(mags) and mags[c] - mags[c - 1] <= gap_tol:
        c += 1
    return c


def low_window(eigs, count, gap_tol=1e-6):
    """The `count` eigenvalues of smallest magnitude, sorted by value.

    The count is expanded past magnitude ties so the window boundary never
    splits a +-pair differently in two spectra being compared.
    """
    eigs = np.asarray(eigs)
    c = _window_count(eigs, count, gap_tol)
    order = np.argsort(np.abs(eigs), kind="stable")
    return np.sort(eigs[order[:c]])


def spectra_distance(eigs1, eigs2, count=None, gap_tol=1e-6):
    """Max absolute difference between the low-lying parts of two spectra.

    Discrete bands are not diffeomorphism-invariant near the Nyquist corners,
    so spectra are compared on a window of smallest-magnitude eigenvalues
    (default: an eighth of the smaller spectrum).  Mismatched window sizes
    count as an infinite distance.
    """
    if count is None:
        count = max(1, min(len(eigs1), len(eigs2)) // 8)
    # Expand to a count at which BOTH spectra have a magnitude gap, so the
    # window never splits a near-degenerate cluster in one spectrum only.
    c = count
    while True:
        c_next = max(_window_count(eigs1, c, gap_tol), _window_count(eigs2, c, gap_tol))
        if c_next == c:
            break
        c = c_next
    w1 = low_window(eigs1, c, gap_tol)
    w2 = low_window(eigs2, c, gap_tol)
    if len(w1) != len(w2):
        return float("inf")
    return float(np.abs(w1 - w2).max())


def multiplicities(eigs, gap=1e-8):
    """Group sorted eigenvalues into (value, count) clusters by gap threshold."""
    eigs = np.sort(np.asarray(eigs))
    groups = []
    start = 0
    for i in range(1, len(eigs) + 1):
        if i == len(eigs) or eigs[i] - eigs[i - 1] > gap:
            block = eigs[start:i]
            groups.append((float(block.mean()), len(block)))
            start = i
    return groups


def count_zero_modes(eigs, tol=1e-10):
    return int(np.sum(np.abs(np.asarray(eigs)) < tol))
