"""Orientation-preserving torus diffeomorphisms acting on metrics, spin
structures, and spinor fields through the two-fold spin lift.

For a diffeomorphism f with Jacobian J and canonical frames E (for g) and
E' (for f*g), the frame rotation field

    R(x) = E(f(x))^{-1} J(x) E'(x)

lies in SO(n) pointwise as an algebraic identity.  Its pointwise spin lift
S(x), made sign-continuous over a deterministic spanning tree, defines the
pair of unitaries

    (U_pm psi)(x) = pm S(x)^{-1} psi(f(x)),

which map fields with twist label delta over g to fields with the pulled
back label delta' over f*g.  The label transport is
delta'_a = sum_c A_ca delta_c + holonomy_a / 2 (mod 1), where A is the
integer part of f and the holonomy records the sign picked up by the lift
around each fundamental cycle.

Exact statements (unitarity, equivariance, spectrum invariance) are made
only for AFFINE grid-compatible maps; SMOOTH maps evaluate closed forms
where possible and use trigonometric interpolation otherwise, with accuracy
phrased as convergence.
"""

from dataclasses import dataclass

import numpy as np

from .clifford import build_gammas, spin_lift
from .dirac import assemble_dirac
from .errors import (
    ConfigError,
    GeometryError,
    GridError,
    InconsistentFramesError,
    OrientationError,
    RefinementNeededError,
    UnsupportedExactnessError,
    WiringError,
)
from .fields import (
    BandLimitedSpinor,
    DiscreteSpinorField,
    SpinStructureLabel,
    inner_product,
    weighted_norm,
)
from .geometry import (
    MetricField,
    MetricGenerator,
    _descriptor_args,
    build_connection,
    frame_at_points,
    orthonormal_frame,
)


# ---------------------------------------------------------------------------
# Torus diffeomorphisms
# ---------------------------------------------------------------------------


class DiffeoMap:
    """Base class: a self-map of T^n, evaluated with unwrapped images."""

    n: int
    descriptor: str
    is_affine = False

    def __call__(self, points):
        raise NotImplementedError

    def jacobian(self, points):
        raise NotImplementedError


class AffineDiffeo(DiffeoMap):
    """f(x) = A x + b with integer A, det A = +1, and a lattice shift b."""

    is_affine = True

    def __init__(self, matrix, shift=None):
        A = np.asarray(matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigError(f"affine matrix must be square, got shape {A.shape}")
        if np.abs(A - np.rint(A)).max() > 1e-12:
            raise GeometryError("affine matrix must have integer entries")
        self.n = A.shape[0]
        self.A = np.rint(A).astype(int)
        det = int(round(np.linalg.det(self.A)))
        if det == -1:
            raise OrientationError(
                "det A = -1 is orientation-reversing; only Diff+ is implemented"
            )
        if det != 1:
            raise GeometryError(f"affine matrix must have determinant +1, got {det}")
        self.shift = np.zeros(self.n) if shift is None else np.asarray(shift, dtype=float)
        if self.shift.shape != (self.n,):
            raise ConfigError(f"shift must have length {self.n}")
        entries = ",".join(format(v, "g") for v in self.A.reshape(-1))
        offs = ",".join(format(v, "g") for v in self.shift)
        self.descriptor = f"affine({entries},{offs})"

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.A.T + self.shift

    def jacobian(self, points):
        points = np.asarray(points)
        out = np.zeros(points.shape[:-1] + (self.n, self.n))
        out[...] = self.A
        return out

    def check_grid(self, grid):
        steps = self.shift * grid.N
        if np.abs(steps - np.rint(steps)).max() > 1e-9:
            raise GridError(
                f"affine shift {self.shift} is not on the 1/{grid.N} lattice"
            )

    def grid_image(self, grid):
        """Integer image indices, their wrap counts, and the seam phases.

        For x = i/N the image is (A i + N b)/N; returns (wrapped indices as an
        index tuple, wrap counts per axis) so callers can apply twist phases.
        """
        self.check_grid(grid)
        N = grid.N
        idx = np.meshgrid(*([np.arange(N)] * self.n), indexing="ij")
        steps = np.rint(self.shift * N).astype(int)
        raw = [
            sum(self.A[a, c] * idx[c] for c in range(self.n)) + steps[a]
            for a in range(self.n)
        ]
        wrapped = tuple(r % N for r in raw)
        wraps = tuple((r - w) // N for r, w in zip(raw, wrapped))
        return wrapped, wraps

    def compose(self, other):
        """self after other: (self.compose(other))(x) = self(other(x))."""
        return AffineDiffeo(self.A @ other.A, self.A @ other.shift + self.shift)


class SmoothShear(DiffeoMap):
    """f_i = x_i + amplitude sin(2 pi mode x_j), all other coordinates fixed."""

    def __init__(self, n, axis_i, axis_j, amplitude, mode):
        if not (1 <= axis_i <= n and 1 <= axis_j <= n):
            raise ConfigError(f"smooth_shear axes must be in 1..{n}")
        self.n = n
        self.i = int(axis_i) - 1
        self.j = int(axis_j) - 1
        self.amplitude = float(amplitude)
        self.mode = int(mode)
        if self.i == self.j and abs(2 * np.pi * self.mode * self.amplitude) >= 1:
            raise OrientationError("shear along its own axis would fold the torus")
        self.descriptor = f"smooth_shear({axis_i:d},{axis_j:d},{self.amplitude:g},{self.mode:d})"

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        out = points.copy()
        out[..., self.i] += self.amplitude * np.sin(2 * np.pi * self.mode * points[..., self.j])
        return out

    def jacobian(self, points):
        points = np.asarray(points)
        out = np.zeros(points.shape[:-1] + (self.n, self.n))
        out[...] = np.eye(self.n)
        out[..., self.i, self.j] += (
            self.amplitude * 2 * np.pi * self.mode * np.cos(2 * np.pi * self.mode * points[..., self.j])
        )
        return out


def parse_diffeo(text, n):
    """Parse a diffeo descriptor: affine(A entries, b entries) | smooth_shear(i,j,amp,mode) | identity."""
    name, args = _descriptor_args(text, "diffeo")
    if name == "identity":
        return AffineDiffeo(np.eye(n, dtype=int))
    if name == "affine":
        if len(args) != n * n + n:
            raise ConfigError(
                f"affine needs {n * n} matrix entries plus {n} shift entries for n={n}"
            )
        A = np.array(args[: n * n]).reshape(n, n)
        return AffineDiffeo(A, np.array(args[n * n :]))
    if name == "smooth_shear":
        if len(args) != 4:
            raise ConfigError("smooth_shear needs (axis_i, axis_j, amplitude, mode)")
        return SmoothShear(n, int(args[0]), int(args[1]), args[2], args[3])
    raise ConfigError(f"unknown diffeo descriptor {name!r}")


# ---------------------------------------------------------------------------
# Pullbacks
# ---------------------------------------------------------------------------


class PullbackMetric(MetricGenerator):
    """Closed form of f*g: J(x)^T g(f(x)) J(x)."""

    def __init__(self, diffeo, base):
        self.n = base.n
        self.diffeo = diffeo
        self.base = base
        self.descriptor = f"pullback({diffeo.descriptor},{base.descriptor})"

    def __call__(self, points):
        J = self.diffeo.jacobian(points)
        g_at = self.base(self.diffeo(points))
        return np.einsum("...ca,...cd,...db->...ab", J, g_at, J)


def pullback_metric(f, metric):
    """(f*g)_ab(x) = J^c_a(x) g_cd(f(x)) J^d_b(x), sampled on the grid.

    Affine maps permute the stored samples exactly; smooth maps require a
    closed-form generator (g is evaluated at f(x), never interpolated).
    """
    grid = metric.grid
    if f.n != grid.n:
        raise WiringError(f"diffeo is for n={f.n}, metric grid has n={grid.n}")
    if f.is_affine:
        wrapped, _ = f.grid_image(grid)
        g_at = metric.values[wrapped]
        A = f.A.astype(float)
        values = np.einsum("ca,...cd,db->...ab", A, g_at, A)
    else:
        if metric.generator is None:
            raise UnsupportedExactnessError(
                "smooth pullback needs a closed-form metric generator"
            )
        points = grid.points()
        J = f.jacobian(points)
        dets = np.linalg.det(J)
        if dets.min() <= 0:
            raise OrientationError("Jacobian determinant is not positive everywhere")
        g_at = metric.generator(f(points))
        values = np.einsum("...ca,...cd,...db->...ab", J, g_at, J)
    generator = PullbackMetric(f, metric.generator) if metric.generator is not None else None
    return MetricField(grid, values, generator)


def frame_rotation_field(f, metric, frame=None, pullback=None, pullback_frame=None):
    """Rotation field R(x) = E(f(x))^{-1} J(x) E'(x) relating the two frames.

    R^T R = E'^T (f*g) E' = Id is an algebraic identity; a defect above 1e-8
    signals inconsistent frames and raises.
    """
    grid = metric.grid
    frame = frame if frame is not None else orthonormal_frame(metric)
    pullback = pullback if pullback is not None else pullback_metric(f, metric)
    pullback_frame = (
        pullback_frame if pullback_frame is not None else orthonormal_frame(pullback)
    )
    points = grid.points()
    if f.is_affine:
        wrapped, _ = f.grid_image(grid)
        E_at = frame.E[wrapped]
    else:
        if metric.generator is None:
            raise UnsupportedExactnessError(
                "smooth frame transport needs a closed-form metric generator"
            )
        E_at = frame_at_points(metric.generator, f(points))
    J = f.jacobian(points)
    R = np.linalg.solve(E_at, J @ pullback_frame.E)
    defect = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(grid.n)).max()
    if defect > 1e-8:
        raise InconsistentFramesError(
            f"frame rotation field is not orthogonal (defect {defect:.3e})"
        )
    return R


# ---------------------------------------------------------------------------
# Spin lift field with sign continuation
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SpinLiftField:
    """Pointwise spin lift of a rotation field, continued in sign.

    twist_correction[a] is 1 when the lift is antiperiodic around cycle a
    (holonomy sign -1), else 0.
    """

    R: np.ndarray
    S: np.ndarray
    base_sign: int
    twist_correction: tuple


def _cycle_holonomy(S, axis, ambiguity_tol=1e-6):
    n_axes = S.ndim - 2
    N = S.shape[axis]
    sign = 1
    for t in range(N):
        cur = tuple(t if a == axis else 0 for a in range(n_axes))
        nxt = tuple((t + 1) % N if a == axis else 0 for a in range(n_axes))
        overlap = np.vdot(S[cur], S[nxt]).real
        if abs(overlap) < ambiguity_tol * S.shape[-1]:
            raise RefinementNeededError(
                f"ambiguous lift continuation on cycle {axis} edge {cur}->{nxt}"
            )
        if overlap < 0:
            sign = -sign
    return sign


def spin_lift_field(R, gammas, base_sign=1, ambiguity_tol=1e-6):
    """Continued spin lift S(x) of a rotation field R(x).

    The lift at the origin is base_sign times the principal lift; signs are
    continued over the lexicographic raster spanning tree from the origin
    (each point's parent decrements its last nonzero index; no periodic
    edges), each edge choosing the sign closer in Frobenius norm.  Any sign
    discontinuity therefore sits at the periodic seam, where it is recorded
    as the holonomy of the corresponding fundamental cycle and absorbed by
    the twist label.
    """
    if base_sign not in (1, -1):
        raise ConfigError(f"base sign must be +-1, got {base_sign}")
    shape = R.shape[:-2]
    k = gammas.k
    raw = np.empty(shape + (k, k), dtype=complex)
    for idx in np.ndindex(shape):
        raw[idx] = spin_lift(R[idx], gammas)[0].matrix

    S = np.empty_like(raw)
    origin = (0,) * len(shape)
    S[origin] = base_sign * raw[origin]
    for idx in np.ndindex(shape):
        if idx == origin:
            continue
        axis = max(a for a in range(len(shape)) if idx[a] > 0)
        parent = idx[:axis] + (idx[axis] - 1,) + idx[axis + 1 :]
        overlap = np.vdot(S[parent], raw[idx]).real
        if abs(overlap) < ambiguity_tol * k:
            raise RefinementNeededError(
                f"ambiguous lift continuation on edge {parent}->{idx}; refine the grid"
            )
        S[idx] = raw[idx] if overlap > 0 else -raw[idx]

    holonomy = tuple(_cycle_holonomy(S, a, ambiguity_tol) for a in range(len(shape)))
    correction = tuple(0 if h > 0 else 1 for h in holonomy)
    return SpinLiftField(R=R, S=S, base_sign=base_sign, twist_correction=correction)


def pullback_spin_structure(f, delta, lift):
    """Twist label of the pulled back spin structure.

    delta'_a = sum_c A_ca delta_c + twist_correction_a / 2 (mod 1), with A
    the integer matrix of an affine map (identity for smooth descriptor maps,
    which are isotopic to the identity).  The A^T term transports the seam
    phases: psi(f(x + e_a)) = psi(f(x) + A e_a) picks up (-1)^(2 delta . A e_a).
    """
    bits = delta.bits()
    n = delta.n
    A = f.A if f.is_affine else np.eye(n, dtype=int)
    out_bits = tuple(
        (sum(int(A[c, a]) * bits[c] for c in range(n)) + lift.twist_correction[a]) % 2
        for a in range(n)
    )
    return SpinStructureLabel.from_bits(out_bits)


# ---------------------------------------------------------------------------
# Trigonometric interpolation of twisted fields
# ---------------------------------------------------------------------------


def evaluate_field_at(field, points):
    """Twisted trigonometric interpolant of a grid spinor field.

    The field is demodulated to integer modes, FFT'd, and the Fourier sum is
    evaluated at the (possibly unwrapped) points; the twist phases make the
    result respect the field's boundary conditions automatically.
    """
    grid = field.grid
    n, N = grid.n, grid.N
    x = grid.points()
    twists = np.array(field.delta.twists)
    demod = np.exp(-2j * np.pi * (x @ twists))
    work = field.values * demod[..., None]
    coeffs = np.fft.fftn(work, axes=tuple(range(n))) / grid.npoints
    modes = np.fft.fftfreq(N, d=1.0 / N)
    mesh = np.stack(np.meshgrid(*([modes] * n), indexing="ij"), axis=-1).reshape(-1, n)
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, n)
    phases = np.exp(2j * np.pi * (flat @ mesh.T))
    out = phases @ coeffs.reshape(-1, field.k)
    out *= np.exp(2j * np.pi * (flat @ twists))[:, None]
    return out.reshape(pts.shape[:-1] + (field.k,))


# ---------------------------------------------------------------------------
# The two lifted unitaries
# ---------------------------------------------------------------------------


class LiftedUnitary:
    """One of the two unitaries (U psi)(x) = sign * S(x)^{-1} psi(f(x)).

    Maps fields with label delta_in over g to fields with label delta_out
    over f*g.  Affine maps act by an exact signed grid permutation; smooth
    maps need interpolation enabled (or closed-form probes).
    """

    def __init__(self, f, grid, lift, delta_in, delta_out, sign, interpolate):
        self.f = f
        self.grid = grid
        self.lift = lift
        self.delta_in = delta_in
        self.delta_out = delta_out
        self.sign = sign
        self.interpolate = interpolate
        self._Sdag = np.conj(np.swapaxes(lift.S, -1, -2))
        if f.is_affine:
            wrapped, wraps = f.grid_image(grid)
            seam = np.ones((grid.N,) * grid.n)
            for a, bit in enumerate(delta_in.bits()):
                if bit:
                    seam *= np.where(np.asarray(wraps[a]) % 2 == 0, 1.0, -1.0)
            self._wrapped = wrapped
            self._seam = seam
        else:
            self._fpoints = f(grid.points())

    def _check_input(self, delta):
        if delta != self.delta_in:
            raise WiringError(
                f"lift expects fields with delta={self.delta_in}, got {delta}"
            )

    def apply(self, field):
        """Apply to a stored grid field."""
        self._check_input(field.delta)
        if field.grid != self.grid:
            raise WiringError("field grid does not match the lift grid")
        if self.f.is_affine:
            gathered = field.values[self._wrapped] * self._seam[..., None]
        else:
            if not self.interpolate:
                raise UnsupportedExactnessError(
                    "smooth maps need interpolate=True (composition is not grid-exact)"
                )
            gathered = evaluate_field_at(field, self._fpoints)
        out = self.sign * np.einsum("...cd,...c->...d", np.conj(self.lift.S), gathered)
        return DiscreteSpinorField(self.grid, self.delta_out, out)

    def apply_closed_form(self, spinor):
        """Apply to a closed-form spinor, evaluating psi(f(x)) exactly."""
        self._check_input(spinor.delta)
        points = self.f(self.grid.points())
        gathered = spinor.evaluate(points)
        out = self.sign * np.einsum("...cd,...c->...d", np.conj(self.lift.S), gathered)
        return DiscreteSpinorField(self.grid, self.delta_out, out)

    def as_matrix(self):
        """Dense matrix, row-major over (x, component) like DiracOperator.dense."""
        if not self.f.is_affine:
            raise UnsupportedExactnessError("dense form is only built for affine maps")
        N, n, k = self.grid.N, self.grid.n, self._Sdag.shape[-1]
        X = self.grid.npoints
        flat_perm = np.ravel_multi_index(self._wrapped, (N,) * n).reshape(-1)
        seam = self._seam.reshape(-1)
        Sdag = self._Sdag.reshape(X, k, k)
        out = np.zeros((X * k, X * k), dtype=complex)
        for x in range(X):
            p = flat_perm[x]
            out[x * k : (x + 1) * k, p * k : (p + 1) * k] = self.sign * seam[x] * Sdag[x]
        return out


# ---------------------------------------------------------------------------
# Bundled action of one diffeomorphism against one metric
# ---------------------------------------------------------------------------


class DiffeoAction:
    """Everything induced by one diffeomorphism acting on (g, delta)."""

    def __init__(self, f, metric, delta, gammas=None, interpolate=False):
        grid = metric.grid
        if f.n != grid.n:
            raise WiringError(f"diffeo dimension {f.n} != grid dimension {grid.n}")
        if f.is_affine:
            f.check_grid(grid)
        else:
            dets = np.linalg.det(f.jacobian(grid.points()))
            if dets.min() <= 0:
                raise OrientationError("Jacobian determinant is not positive everywhere")
        self.f = f
        self.grid = grid
        self.metric = metric
        self.delta_in = delta
        self.gammas = gammas if gammas is not None else build_gammas(grid.n)
        self.interpolate = interpolate
        self.frame = orthonormal_frame(metric)
        self.pullback = pullback_metric(f, metric)
        self.pullback_frame = orthonormal_frame(self.pullback)
        self.rotation = frame_rotation_field(
            f, metric, frame=self.frame, pullback=self.pullback,
            pullback_frame=self.pullback_frame,
        )
        self.lift = spin_lift_field(self.rotation, self.gammas)
        self.delta_out = pullback_spin_structure(f, delta, self.lift)
        self._conn_in = None
        self._conn_out = None
        self._dirac_in = None
        self._dirac_out = None

    @property
    def conn_in(self):
        if self._conn_in is None:
            self._conn_in = build_connection(self.metric, self.frame)
        return self._conn_in

    @property
    def conn_out(self):
        if self._conn_out is None:
            self._conn_out = build_connection(self.pullback, self.pullback_frame)
        return self._conn_out

    def unitary(self, sign=1):
        if sign not in (1, -1):
            raise ConfigError(f"lift sign must be +-1, got {sign}")
        return LiftedUnitary(
            self.f, self.grid, self.lift, self.delta_in, self.delta_out, sign,
            self.interpolate,
        )

    def dirac_in(self):
        if self._dirac_in is None:
            self._dirac_in = assemble_dirac(self.frame, self.conn_in, self.gammas, self.delta_in)
        return self._dirac_in

    def dirac_out(self):
        if self._dirac_out is None:
            self._dirac_out = assemble_dirac(
                self.pullback_frame, self.conn_out, self.gammas, self.delta_out
            )
        return self._dirac_out

    def unitarity_defect(self, probe_pairs):
        """max |<U psi | U phi>_out - <psi | phi>_in| over probe pairs, both signs."""
        worst = 0.0
        for sign in (1, -1):
            u = self.unitary(sign)
            for psi, phi in probe_pairs:
                upsi, uphi = u.apply(psi), u.apply(phi)
                before = inner_product(psi, phi, self.conn_in)
                after = inner_product(upsi, uphi, self.conn_out)
                worst = max(worst, abs(after - before))
        return worst


def lift_unitary(f, metric, delta, sign=1, gammas=None, interpolate=False):
    """Build the lifted unitary U_sign for f acting on (metric, delta)."""
    action = DiffeoAction(f, metric, delta, gammas=gammas, interpolate=interpolate)
    return action.unitary(sign)


def equivariance_residual(dprime, u, d, probes):
    """max over probes of |D' U psi - U D psi| / |D psi| in the weighted norms.

    Probes may be closed-form spinors (evaluated exactly at mapped points) or
    stored grid fields (interpolated for smooth maps).  D must be built for
    (delta_in, g) and D' for (delta_out, f*g).
    """
    if d.delta != u.delta_in or dprime.delta != u.delta_out:
        raise WiringError(
            f"operator labels ({d.delta}; {dprime.delta}) do not match the lift "
            f"({u.delta_in} -> {u.delta_out})"
        )
    if d.grid != u.grid or dprime.grid != u.grid:
        raise WiringError("operators and lift live on different grids")
    worst = 0.0
    for probe in probes:
        if isinstance(probe, BandLimitedSpinor):
            psi = probe.sample(u.grid)
            u_psi = u.apply_closed_form(probe)
        else:
            psi = probe
            u_psi = u.apply(psi)
        d_psi = d.apply(psi)
        lhs = dprime.apply(u_psi)
        rhs = u.apply(d_psi)
        num = weighted_norm(lhs - rhs, dprime.conn)
        den = weighted_norm(d_psi, d.conn)
        if den == 0:
            raise GeometryError("probe lies in the kernel of D; pick another probe")
        worst = max(worst, num / den)
    return worst
