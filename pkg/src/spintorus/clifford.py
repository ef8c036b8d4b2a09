"""Fiber-level Clifford algebra: gamma matrices, the spin representation,
and the two-fold lift of SO(n) rotations.

Conventions used throughout the package:

* gamma matrices are Hermitian and satisfy ``g_j g_m + g_m g_j = 2 delta_jm``
  entrywise exactly (all entries lie in {0, +-1, +-i});
* a rotation ``R = exp(A)`` with antisymmetric ``A`` lifts to
  ``S = exp(1/4 sum_{jm} A_jm g_j g_m)``, the scalar factor being pinned by
  the adjoint-action identity ``S g_m S^-1 = sum_j g_j R_jm`` rather than
  assumed;
* the two lifts of any rotation are ``S`` and ``-S``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionError,
    NonOrthogonalError,
    NotSpinElementError,
    OrientationError,
    RefinementNeededError,
    SpinTorusError,
)

MAX_DIMENSION = 8

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True, eq=False)
class GammaSet:
    """Gamma matrices and derived spin-representation data for dimension n.

    ``gammas[j]`` is the j-th k x k gamma matrix, k = 2**(n//2).
    ``bivector_generators[p]`` is (1/4)[g_j, g_m] for the pair
    ``bivector_pairs[p] = (j, m)`` with j < m.
    """

    n: int
    k: int
    gammas: np.ndarray
    bivector_pairs: tuple
    bivector_generators: np.ndarray


def _kron_chain(factors):
    out = np.array([[1.0 + 0.0j]])
    for f in factors:
        out = np.kron(out, f)
    return out


def build_gammas(n, max_dim=MAX_DIMENSION):
    """Construct the gamma matrices for Euclidean R^n.

    Tensor-product recursion with the Pauli matrices s1, s2, s3 and
    m = n // 2 blocks:

        gamma_{2t-1} = s3 x ... x s3 x s1 x I x ... x I   (s1 in slot t)
        gamma_{2t}   = s3 x ... x s3 x s2 x I x ... x I   (s2 in slot t)
        gamma_n      = s3 x ... x s3                       (n odd)

    All entries stay in {0, +-1, +-i}, so the anticommutation and
    Hermiticity identities hold without roundoff.  The recursion is fixed;
    frame conventions elsewhere depend on its determinism.
    """
    if n < 1:
        raise DimensionError(f"dimension must be >= 1, got {n}")
    if n > max_dim:
        raise DimensionError(f"dimension {n} exceeds the configured maximum {max_dim}")
    m = n // 2
    eye2 = np.eye(2, dtype=complex)
    gammas = []
    for j in range(1, n + 1):
        if j == n and n % 2 == 1:
            factors = [_PAULI[2]] * m
        else:
            t = (j + 1) // 2
            slot = _PAULI[0] if j % 2 == 1 else _PAULI[1]
            factors = [_PAULI[2]] * (t - 1) + [slot] + [eye2] * (m - t)
        gammas.append(_kron_chain(factors))
    gammas = np.array(gammas)
    k = gammas.shape[-1]

    pairs = []
    bivs = []
    for j in range(n):
        for l in range(j + 1, n):
            pairs.append((j, l))
            comm = gammas[j] @ gammas[l] - gammas[l] @ gammas[j]
            bivs.append(0.25 * comm)
    bivs = np.array(bivs) if bivs else np.zeros((0, k, k), dtype=complex)
    return GammaSet(n=n, k=k, gammas=gammas, bivector_pairs=tuple(pairs), bivector_generators=bivs)


@dataclass(frozen=True, eq=False)
class SpinElement:
    """A unitary k x k matrix in the spin representation."""

    matrix: np.ndarray

    def __neg__(self):
        return SpinElement(-self.matrix)


def _matrix_of(s):
    return s.matrix if isinstance(s, SpinElement) else np.asarray(s)


def adjoint_rotation(s, gammas, residual_tol=1e-10):
    """Rotation R implemented by the adjoint action of a spin element.

    Returns R with ``S g_m S^-1 = sum_j g_j R_jm``; this realizes the double
    cover Spin(n) -> SO(n) concretely.  Raises NotSpinElementError when the
    adjoint action leaves the span of the gammas by more than residual_tol.
    """
    S = _matrix_of(s)
    G = gammas.gammas
    k = gammas.k
    if S.shape != (k, k):
        raise DimensionError(f"spin element has shape {S.shape}, expected {(k, k)}")
    unitarity = np.abs(S.conj().T @ S - np.eye(k)).max()
    if unitarity > residual_tol:
        raise NotSpinElementError(f"matrix is not unitary (defect {unitarity:.3e})")
    conj = np.einsum("ab,jbc,dc->jad", S, G, S.conj())
    # Gammas are trace-orthogonal: tr(g_j g_m) = k delta_jm.
    coeff = np.einsum("jab,mba->jm", G, conj) / k
    R = coeff.real
    recon = np.einsum("jm,jab->mab", R, G)
    residual = np.abs(conj - recon).max()
    if residual > residual_tol:
        raise NotSpinElementError(
            f"adjoint action leaves the gamma span (residual {residual:.3e})"
        )
    return R


def rotation_log(R, orth_tol=1e-10):
    """Real antisymmetric A with exp(A) = R, all rotation angles in [-pi, pi].

    Built from the real Schur form.  Eigenvalue pairs at -1 (rotation angle
    pi, where the principal logarithm is discontinuous) are paired
    explicitly into pi-rotation planes; an odd count means det R = -1.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    defect = np.abs(R.T @ R - np.eye(n)).max()
    if defect > orth_tol:
        raise NonOrthogonalError(f"input is not orthogonal (defect {defect:.3e})")
    if n == 1:
        if R[0, 0] < 0:
            raise OrientationError("det R = -1; only orientation-preserving rotations lift")
        return np.zeros((1, 1))
    T, Q = scipy.linalg.schur(R, output="real")
    A_hat = np.zeros((n, n))
    minus_ones = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-8:
            theta = np.arctan2(T[i + 1, i], T[i, i])
            A_hat[i, i + 1] = -theta
            A_hat[i + 1, i] = theta
            i += 2
        else:
            if T[i, i] < 0:
                minus_ones.append(i)
            i += 1
    if len(minus_ones) % 2 == 1:
        raise OrientationError("det R = -1; only orientation-preserving rotations lift")
    for p, q in zip(minus_ones[0::2], minus_ones[1::2]):
        A_hat[p, q] = -np.pi
        A_hat[q, p] = np.pi
    A = Q @ A_hat @ Q.T
    return 0.5 * (A - A.T)


def _exp_bivector(A, gammas):
    """exp of the spin-algebra image (1/4) sum_{jm} A_jm g_j g_m."""
    X = np.zeros((gammas.k, gammas.k), dtype=complex)
    for p, (j, m) in enumerate(gammas.bivector_pairs):
        X += A[j, m] * gammas.bivector_generators[p]
    return scipy.linalg.expm(X)


def spin_lift(R, gammas, orth_tol=1e-10):
    """The two spin elements covering a rotation R in SO(n).

    Returns (S, -S) with ``adjoint_rotation(S) = R``.  Rotations with an
    angle near pi are factored through the half-angle rotation and the lifts
    composed, avoiding the branch cut of the principal logarithm.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (gammas.n, gammas.n):
        raise DimensionError(f"rotation has shape {R.shape}, expected {(gammas.n,) * 2}")
    A = rotation_log(R, orth_tol=orth_tol)
    max_angle = np.linalg.norm(A, 2) if gammas.n > 1 else 0.0
    if max_angle > 0.75 * np.pi:
        half = _exp_bivector(0.5 * A, gammas)
        S = half @ half
    else:
        S = _exp_bivector(A, gammas)
    check = np.abs(adjoint_rotation(S, gammas) - R).max()
    if check > 1e-9:
        raise SpinTorusError(f"spin lift failed to reproduce the rotation (defect {check:.3e})")
    return SpinElement(S), SpinElement(-S)


def nearest_lift(previous, R, gammas, ambiguity_tol=1e-6):
    """Lift of R (a bare matrix) whose sign is continuous with `previous`.

    The sign is chosen by Frobenius proximity, i.e. by the sign of
    Re tr(previous^dagger S_raw).  An ambiguous choice (the rotation jumps
    by about pi between neighbours) raises RefinementNeededError.
    """
    prev = _matrix_of(previous)
    raw = _matrix_of(spin_lift(R, gammas)[0])
    overlap = np.vdot(prev, raw).real
    if abs(overlap) < ambiguity_tol * gammas.k:
        raise RefinementNeededError(
            "both lift signs are equidistant; refine the rotation path"
        )
    return raw if overlap > 0 else -raw


def lift_path(rotations, gammas, base_sign=1):
    """Sign-continuous lifts along a sequence of rotations.

    The first entry is lifted with the given base sign; each subsequent lift
    takes the sign closest to its predecessor.  Returns the list of lift
    matrices; the endpoint of a closed 2*pi path lands on the other sheet.
    """
    rotations = list(rotations)
    if not rotations:
        return []
    out = [base_sign * _matrix_of(spin_lift(rotations[0], gammas)[0])]
    for R in rotations[1:]:
        out.append(nearest_lift(out[-1], R, gammas))
    return out
