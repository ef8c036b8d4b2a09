"""Periodic grid geometry on the flat-chart torus T^n = R^n / Z^n.

Grids are uniform with N points per axis, x_i = i/N, period 1.  Metrics are
supplied as closed-form periodic generators and sampled on demand, so
refinement studies resample exactly instead of interpolating.

Index conventions (fixed package-wide):

* metric values ``g[..., a, b]`` with coordinate indices a, b;
* frame ``E[..., a, j]``: column j holds the coordinate components of the
  j-th orthonormal frame vector, ``e_j = sum_a E[a, j] d/dx_a``;
* coframe ``Einv[..., j, a]`` is the matrix inverse of E;
* structure constants ``c[..., i, j, k]``: [e_i, e_j] = sum_k c_ijk e_k;
* frame connection ``Gamma[..., j, k, l]`` = <nabla_{e_j} e_l, e_k>,
  skew in (k, l).
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError, GridError

SCHEMES = ("spectral", "fd2", "fd4")
SCHEME_ORDERS = {"fd2": 2, "fd4": 4}


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: n axes, N points per axis, spacing h = 1/N."""

    n: int
    N: int
    scheme: str = "spectral"

    def __post_init__(self):
        if self.n < 1:
            raise GridError(f"dimension must be >= 1, got {self.n}")
        if self.N < 4 or self.N % 2 != 0:
            raise GridError(f"N must be even and >= 4, got {self.N}")
        if self.scheme not in SCHEMES:
            raise GridError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def npoints(self):
        return self.N**self.n

    def axis_coordinates(self):
        return np.arange(self.N) / self.N

    def points(self):
        """Coordinates of every grid point, shape (N,)*n + (n,)."""
        axes = [self.axis_coordinates()] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def twisted_roll(values, shift, axis, antiperiodic=False):
    """values sampled at (index + shift) along axis, with the wrap phase.

    Entries that cross the periodic seam are multiplied by -1 when
    antiperiodic (twist 1/2 boundary conditions).
    """
    out = np.roll(values, -shift, axis=axis)
    if antiperiodic and shift != 0:
        sl = [slice(None)] * out.ndim
        if shift > 0:
            sl[axis] = slice(out.shape[axis] - shift, None)
        else:
            sl[axis] = slice(0, -shift)
        out[tuple(sl)] = -out[tuple(sl)]
    return out


def _axis_shape(ndim, axis, N):
    shape = [1] * ndim
    shape[axis] = N
    return tuple(shape)


def _spectral_derivative(values, axis, N, twist):
    x = np.arange(N) / N
    phase_shape = _axis_shape(values.ndim, axis, N)
    work = values.astype(complex)
    if twist:
        work = work * np.exp(-1j * np.pi * x).reshape(phase_shape)
    modes = np.fft.fftfreq(N, d=1.0 / N)  # integers, Nyquist at -N/2
    F = np.fft.fft(work, axis=axis)
    F *= (2j * np.pi * (modes + twist)).reshape(phase_shape)
    out = np.fft.ifft(F, axis=axis)
    if twist:
        out = out * np.exp(1j * np.pi * x).reshape(phase_shape)
    elif np.isrealobj(values):
        # Real input, integer modes: drop the purely imaginary Nyquist
        # sawtooth so geometry fields stay real.
        return out.real
    return out


def discrete_derivative(values, axis, grid, twist=0.0):
    """d/dx_axis of a grid field with twist-adapted periodicity.

    twist is 0 (periodic) or 1/2 (antiperiodic).  SPECTRAL differentiates
    through the FFT with integer modes (twist 0) or half-integer modes
    (twist 1/2, via demodulation by exp(-i pi x)); FD2/FD4 use central
    stencils with a sign flip on samples crossing the seam.
    """
    if twist not in (0, 0.0, 0.5):
        raise GridError(f"twist must be 0 or 0.5, got {twist}")
    N = grid.N
    if values.shape[axis] != N:
        raise GridError(f"axis {axis} has length {values.shape[axis]}, grid expects {N}")
    if grid.scheme == "spectral":
        return _spectral_derivative(values, axis, N, float(twist))
    anti = twist == 0.5
    h = grid.h
    if grid.scheme == "fd2":
        return (
            twisted_roll(values, 1, axis, anti) - twisted_roll(values, -1, axis, anti)
        ) / (2 * h)
    return (
        -twisted_roll(values, 2, axis, anti)
        + 8 * twisted_roll(values, 1, axis, anti)
        - 8 * twisted_roll(values, -1, axis, anti)
        + twisted_roll(values, -2, axis, anti)
    ) / (12 * h)


# ---------------------------------------------------------------------------
# Metric generators (closed-form, exactly resamplable)
# ---------------------------------------------------------------------------


class MetricGenerator:
    """Closed-form periodic metric, evaluable at arbitrary points."""

    n: int
    descriptor: str

    def __call__(self, points):
        raise NotImplementedError

    def sample(self, grid):
        if grid.n != self.n:
            raise GridError(f"grid dimension {grid.n} != metric dimension {self.n}")
        return MetricField(grid, self(grid.points()), generator=self)


class FlatMetric(MetricGenerator):
    def __init__(self, n):
        self.n = n
        self.descriptor = "flat"

    def __call__(self, points):
        points = np.asarray(points)
        out = np.zeros(points.shape[:-1] + (self.n, self.n))
        out[...] = np.eye(self.n)
        return out


class ConstantMetric(MetricGenerator):
    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        self.n = matrix.shape[0]
        self.matrix = 0.5 * (matrix + matrix.T)
        entries = ",".join(
            format(self.matrix[a, b], "g") for a in range(self.n) for b in range(a, self.n)
        )
        self.descriptor = f"constant({entries})"

    def __call__(self, points):
        points = np.asarray(points)
        out = np.zeros(points.shape[:-1] + (self.n, self.n))
        out[...] = self.matrix
        return out


class ConformalMetric(MetricGenerator):
    """g = exp(2u) * identity with u(x) = amplitude * sin(2 pi m.x)."""

    def __init__(self, n, amplitude, modes):
        self.n = n
        self.amplitude = float(amplitude)
        self.modes = np.asarray(modes, dtype=float)
        if self.modes.shape != (n,):
            raise ConfigError(f"conformal mode vector must have length {n}")
        entries = ",".join(format(m, "g") for m in self.modes)
        self.descriptor = f"conformal({self.amplitude:g},{entries})"

    def exponent(self, points):
        return self.amplitude * np.sin(2 * np.pi * np.asarray(points) @ self.modes)

    def __call__(self, points):
        u = self.exponent(points)
        return np.exp(2 * u)[..., None, None] * np.eye(self.n)


class DiagWaveMetric(MetricGenerator):
    """Identity metric except g_aa = (1 + amplitude sin(2 pi mode x_b))^2.

    axis is 1-indexed; the wave runs along the cyclically next axis b, so
    diag_wave(2, 0.2, 1) on T^2 is diag(1, (1 + 0.2 sin 2 pi x_1)^2).
    """

    def __init__(self, n, axis, amplitude, mode):
        if not 1 <= axis <= n:
            raise ConfigError(f"diag_wave axis must be in 1..{n}, got {axis}")
        if abs(amplitude) >= 1:
            raise ConfigError("diag_wave amplitude must satisfy |amplitude| < 1")
        self.n = n
        self.axis = int(axis) - 1
        self.wave_axis = (self.axis + 1) % n
        self.amplitude = float(amplitude)
        self.mode = int(mode)
        self.descriptor = f"diag_wave({axis:d},{self.amplitude:g},{self.mode:d})"

    def profile(self, points):
        x = np.asarray(points)[..., self.wave_axis]
        return 1.0 + self.amplitude * np.sin(2 * np.pi * self.mode * x)

    def __call__(self, points):
        points = np.asarray(points)
        out = np.zeros(points.shape[:-1] + (self.n, self.n))
        out[...] = np.eye(self.n)
        out[..., self.axis, self.axis] = self.profile(points) ** 2
        return out


_DESCRIPTOR_RE = re.compile(r"^\s*([a-z_][a-z0-9_]*)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)


def _descriptor_args(text, what):
    m = _DESCRIPTOR_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse {what} descriptor {text!r}")
    name = m.group(1).lower()
    raw = m.group(2)
    if raw is None or raw.strip() == "":
        return name, []
    try:
        args = [float(tok) for tok in raw.split(",")]
    except ValueError as exc:
        raise ConfigError(f"non-numeric argument in {what} descriptor {text!r}") from exc
    return name, args


def parse_metric(text, n):
    """Parse a metric descriptor: flat | constant(...) | conformal(...) | diag_wave(...)."""
    name, args = _descriptor_args(text, "metric")
    if name == "flat":
        if args:
            raise ConfigError("flat takes no arguments")
        return FlatMetric(n)
    if name == "constant":
        want = n * (n + 1) // 2
        if len(args) != want:
            raise ConfigError(
                f"constant needs the {want} upper-triangle entries for n={n}, got {len(args)}"
            )
        mat = np.zeros((n, n))
        it = iter(args)
        for a in range(n):
            for b in range(a, n):
                mat[a, b] = mat[b, a] = next(it)
        return ConstantMetric(mat)
    if name == "conformal":
        if len(args) != n + 1:
            raise ConfigError(f"conformal needs amplitude plus {n} mode entries")
        return ConformalMetric(n, args[0], args[1:])
    if name == "diag_wave":
        if len(args) != 3:
            raise ConfigError("diag_wave needs (axis, amplitude, mode)")
        return DiagWaveMetric(n, int(args[0]), args[1], int(args[2]))
    raise ConfigError(f"unknown metric descriptor {name!r}")


# ---------------------------------------------------------------------------
# Sampled fields
# ---------------------------------------------------------------------------


def _first_bad_point(values):
    eigs = np.linalg.eigvalsh(values)
    bad = np.argwhere(eigs[..., 0] <= 0)
    return tuple(int(i) for i in bad[0]) if len(bad) else None


@dataclass(eq=False)
class MetricField:
    """Grid-sampled SPD metric, optionally backed by its closed-form generator."""

    grid: GridSpec
    values: np.ndarray
    generator: MetricGenerator = None

    def __post_init__(self):
        n, N = self.grid.n, self.grid.N
        expected = (N,) * n + (n, n)
        if self.values.shape != expected:
            raise GeometryError(f"metric values have shape {self.values.shape}, expected {expected}")
        sym_defect = np.abs(self.values - np.swapaxes(self.values, -1, -2)).max()
        if sym_defect > 1e-12:
            raise GeometryError(f"metric is not symmetric (defect {sym_defect:.3e})")
        try:
            np.linalg.cholesky(self.values)
        except np.linalg.LinAlgError:
            raise GeometryError(
                f"metric is not positive definite at grid point {_first_bad_point(self.values)}"
            ) from None

    @property
    def descriptor(self):
        return self.generator.descriptor if self.generator is not None else "sampled"

    def volume_density(self):
        return np.sqrt(np.linalg.det(self.values))


@dataclass(eq=False)
class FrameField:
    """Canonical oriented orthonormal frame E and its coframe Einv."""

    grid: GridSpec
    E: np.ndarray
    Einv: np.ndarray


def orthonormal_frame(metric):
    """Canonical orthonormal frame: lower Cholesky factor of g^{-1}.

    E is the unique lower-triangular matrix with positive diagonal such that
    E^T g E = Id; deterministic and smooth in x for smooth g.
    """
    ginv = np.linalg.inv(metric.values)
    ginv = 0.5 * (ginv + np.swapaxes(ginv, -1, -2))
    try:
        E = np.linalg.cholesky(ginv)
    except np.linalg.LinAlgError:
        raise GeometryError(
            f"inverse metric is not positive definite at grid point {_first_bad_point(ginv)}"
        ) from None
    return FrameField(metric.grid, E, np.linalg.inv(E))


def frame_at_points(metric_generator, points):
    """Canonical frame of a closed-form metric evaluated off-grid."""
    g = metric_generator(points)
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + np.swapaxes(ginv, -1, -2))
    return np.linalg.cholesky(ginv)


def structure_constants(frame):
    """Structure constants c_ijk of the frame commutators.

    [e_i, e_j]^b = E^a_i d_a E^b_j - E^a_j d_a E^b_i computed with the grid's
    derivative scheme, then projected on the coframe: c_ijk = theta^k_b [.,.]^b.
    Antisymmetric in (i, j) by construction.
    """
    grid = frame.grid
    E = frame.E
    dE = np.stack(
        [discrete_derivative(E, axis=a, grid=grid) for a in range(grid.n)], axis=0
    )  # dE[a, ..., b, j] = d_a E^b_j
    t1 = np.einsum("...ai,a...bj->...bij", E, dE)
    comm = t1 - np.swapaxes(t1, -1, -2)  # [..., b, i, j]
    return np.einsum("...bij,...kb->...ijk", comm, frame.Einv)


def christoffel_frame(c, all_plus=False):
    """Levi-Civita connection coefficients in the orthonormal frame.

    Gamma_jkl = (1/2)(c_jlk - c_jkl - c_lkj), the Koszul combination that
    reproduces levi_civita_oracle (skew in (k, l)).  With all_plus=True the
    unhalved all-plus combination c_jkl + c_jlk + c_lkj over the same three
    index arrangements is returned instead, for cross-checking against
    conventions that quote it: the two are related by flipping the signs of
    the first and third terms and halving.
    """
    c_jlk = np.swapaxes(c, -1, -2)
    c_lkj = np.swapaxes(c, -3, -1)
    if all_plus:
        return c + c_jlk + c_lkj
    return 0.5 * (c_jlk - c - c_lkj)


@dataclass(eq=False)
class ConnectionField:
    """Structure constants, frame connection, and volume density of a metric."""

    grid: GridSpec
    c: np.ndarray
    Gamma: np.ndarray
    vol: np.ndarray


def build_connection(metric, frame=None):
    frame = frame if frame is not None else orthonormal_frame(metric)
    c = structure_constants(frame)
    return ConnectionField(metric.grid, c, christoffel_frame(c), metric.volume_density())


def levi_civita_oracle(metric, frame=None):
    """Coordinate Christoffel symbols and their orthonormal-frame projection.

    Gamma^a_bc = (1/2) g^{ad} (d_b g_dc + d_c g_db - d_d g_bc) by discrete
    derivatives, projected as omega_jkl = theta^k_b (E^a_j d_a E^b_l
    + E^a_j Gamma^b_ac E^c_l).  Serves as ground truth for christoffel_frame.
    Returns (coordinate symbols [..., a, b, c], frame projection [..., j, k, l]).
    """
    grid = metric.grid
    frame = frame if frame is not None else orthonormal_frame(metric)
    g = metric.values
    ginv = np.linalg.inv(g)
    dg = np.stack(
        [discrete_derivative(g, axis=a, grid=grid) for a in range(grid.n)], axis=0
    )  # dg[e, ..., a, b] = d_e g_ab
    t1 = np.einsum("...ad,b...dc->...abc", ginv, dg)
    t2 = np.einsum("...ad,c...db->...abc", ginv, dg)
    t3 = np.einsum("...ad,d...bc->...abc", ginv, dg)
    coord = 0.5 * (t1 + t2 - t3)

    E, Einv = frame.E, frame.Einv
    dE = np.stack([discrete_derivative(E, axis=a, grid=grid) for a in range(grid.n)], axis=0)
    p1 = np.einsum("...aj,a...bl->...bjl", E, dE)
    p2 = np.einsum("...aj,...bac,...cl->...bjl", E, coord, E)
    omega = np.einsum("...kb,...bjl->...jkl", Einv, p1 + p2)
    return coord, omega
