"""Spin structures of T^n as twisted boundary conditions and discrete
spinor fields with their weighted L^2 inner product.

A spin structure on the torus is a vector delta in {0, 1/2}^n, one twist per
fundamental cycle: crossing the periodic seam along axis a multiplies field
values by (-1)^(2 delta_a).  Stored values live on one fundamental domain;
components are taken in the canonical spinor frame over the canonical
orthonormal frame.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import GridError, SpinStructureMismatchError, SpinTorusError


@dataclass(frozen=True)
class SpinStructureLabel:
    """Twist label delta in {0, 1/2}^n; a torsor over (Z/2)^n."""

    twists: tuple

    def __post_init__(self):
        for t in self.twists:
            if t not in (0.0, 0.5):
                raise SpinTorusError(f"twist entries must be exactly 0 or 0.5, got {t}")
        object.__setattr__(self, "twists", tuple(float(t) for t in self.twists))

    @classmethod
    def zero(cls, n):
        return cls((0.0,) * n)

    @classmethod
    def from_bits(cls, bits):
        return cls(tuple(b % 2 * 0.5 for b in bits))

    @classmethod
    def from_text(cls, text):
        try:
            return cls(tuple(float(tok) for tok in text.split(",")))
        except ValueError as exc:
            raise SpinTorusError(f"cannot parse twist label {text!r}") from exc

    @property
    def n(self):
        return len(self.twists)

    def bits(self):
        """Twists as integers in {0, 1} (twice the twist)."""
        return tuple(int(round(2 * t)) for t in self.twists)

    def seam_signs(self):
        """(-1)^(2 delta_a) per axis."""
        return np.array([1 - 2 * b for b in self.bits()])

    def difference(self, other):
        """Class difference in (Z/2)^n = H^1(T^n; Z/2)."""
        return tuple((a - b) % 2 for a, b in zip(self.bits(), other.bits()))

    def __str__(self):
        return ",".join("0.5" if b else "0" for b in self.bits())

    def __iter__(self):
        return iter(self.twists)


def all_labels(n):
    """All 2^n spin-structure labels of T^n, lexicographic in the bits."""
    out = []
    for mask in range(2**n):
        out.append(SpinStructureLabel.from_bits(tuple((mask >> a) & 1 for a in range(n))))
    return out


@dataclass(eq=False)
class DiscreteSpinorField:
    """C^k-valued grid function with delta-twisted periodicity."""

    grid: object
    delta: SpinStructureLabel
    values: np.ndarray

    def __post_init__(self):
        if self.delta.n != self.grid.n:
            raise SpinStructureMismatchError(
                f"label has {self.delta.n} twists for an n={self.grid.n} grid"
            )
        expected = (self.grid.N,) * self.grid.n
        if self.values.shape[: self.grid.n] != expected or self.values.ndim != self.grid.n + 1:
            raise GridError(
                f"spinor values have shape {self.values.shape}, expected {expected} + (k,)"
            )
        if not np.iscomplexobj(self.values):
            self.values = self.values.astype(complex)

    @property
    def k(self):
        return self.values.shape[-1]

    def _like(self, values):
        return DiscreteSpinorField(self.grid, self.delta, values)

    def __add__(self, other):
        _check_compatible(self, other)
        return self._like(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self._like(self.values - other.values)

    def __mul__(self, scalar):
        return self._like(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.values)


def _check_compatible(psi, phi):
    if psi.grid != phi.grid:
        raise GridError("spinor fields live on different grids")
    if psi.delta != phi.delta:
        raise SpinStructureMismatchError(
            f"incompatible spin structures {psi.delta} and {phi.delta}; "
            "the spaces are distinct per twist label"
        )


def pointwise_density(psi, phi):
    """Pointwise Hermitian density a_{psi,phi}(x) = (psi(x) | phi(x)).

    Conjugate-linear in the first argument.  Independent of the twist seam:
    both fields flip together so the signs cancel.
    """
    _check_compatible(psi, phi)
    return np.einsum("...c,...c->...", psi.values.conj(), phi.values)


def inner_product(psi, phi, conn):
    """Weighted L^2 pairing: sum_x a_{psi,phi}(x) vol(x) h^n.

    The plain Riemann sum is the exact periodic trapezoidal quadrature.
    """
    if conn.grid != psi.grid:
        raise GridError("connection field lives on a different grid")
    a = pointwise_density(psi, phi)
    return complex(np.sum(a * conn.vol) * psi.grid.h**psi.grid.n)


def weighted_norm(psi, conn):
    return float(np.sqrt(max(inner_product(psi, psi, conn).real, 0.0)))


def equivalent_prolongation_unitary(psi, global_sign):
    """The two unitaries between torus-equivalent prolongations: psi -> +-psi."""
    if global_sign not in (1, -1):
        raise SpinTorusError(f"global sign must be +-1, got {global_sign}")
    return psi._like(global_sign * psi.values)


# ---------------------------------------------------------------------------
# Closed-form band-limited spinors (probe fields)
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class BandLimitedSpinor:
    """Closed-form spinor psi(x) = sum_m C_m exp(2 pi i (m + delta).x).

    Defined on all of R^n (the twisted plane waves are entire), so it can be
    evaluated exactly at mapped points f(x) without interpolation.
    """

    delta: SpinStructureLabel
    modes: np.ndarray  # (M, n) integers
    coeffs: np.ndarray  # (M, k) complex

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        freq = self.modes + np.array(self.delta.twists)
        phases = np.exp(2j * np.pi * (points @ freq.T))
        return phases @ self.coeffs

    def sample(self, grid):
        return DiscreteSpinorField(grid, self.delta, self.evaluate(grid.points()))


def mode_box(n, max_mode):
    """All integer modes with |m_a| <= max_mode, shape ((2L+1)^n, n)."""
    axis = np.arange(-max_mode, max_mode + 1)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def random_band_limited(n, k, delta, max_mode, rng):
    """Random closed-form spinor supported on the mode box |m_a| <= max_mode."""
    modes = mode_box(n, max_mode)
    shape = (len(modes), k)
    coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(
        len(modes)
    )
    return BandLimitedSpinor(delta, modes, coeffs)


def random_spinor_field(grid, k, delta, rng):
    """Unstructured random grid spinor (no band limit)."""
    shape = (grid.N,) * grid.n + (k,)
    values = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return DiscreteSpinorField(grid, delta, values)


# ---------------------------------------------------------------------------
# Serialization (JSON, documented layout)
# ---------------------------------------------------------------------------

FIELD_FORMAT = "spintorus-spinor/1"


def field_to_json_dict(field):
    """JSON layout: header (n, N, k, scheme, delta) then values as a flat
    list of [re, im] pairs, row-major over (x_1, ..., x_n, component)."""
    flat = field.values.reshape(-1)
    return {
        "format": FIELD_FORMAT,
        "n": field.grid.n,
        "N": field.grid.N,
        "k": field.k,
        "scheme": field.grid.scheme,
        "delta": list(field.delta.twists),
        "values": [[float(z.real), float(z.imag)] for z in flat],
    }


def save_field_json(field, path):
    with open(path, "w") as fh:
        json.dump(field_to_json_dict(field), fh)


def field_from_json_dict(data):
    from .geometry import GridSpec

    if data.get("format") != FIELD_FORMAT:
        raise SpinTorusError(f"unsupported field format {data.get('format')!r}")
    grid = GridSpec(n=data["n"], N=data["N"], scheme=data.get("scheme", "spectral"))
    delta = SpinStructureLabel(tuple(data["delta"]))
    raw = np.array(data["values"], dtype=float)
    values = (raw[:, 0] + 1j * raw[:, 1]).reshape((grid.N,) * grid.n + (data["k"],))
    return DiscreteSpinorField(grid, delta, values)


def load_field_json(path):
    with open(path) as fh:
        return field_from_json_dict(json.load(fh))
