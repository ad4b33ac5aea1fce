"""Gaussian (quasi-free) covariance algebra for one and two bosonic modes.

Conventions (hbar = 1 throughout):

* A mode pairs two real field smearings; its covariance matrix ``A`` holds the
  symmetrized two-point values, normalized so the vacuum of a matched mode is
  the identity matrix.  The uncertainty relation reads ``A + i*s >= 0`` with
  ``s = [[0, 1], [-1, 0]]``, hence ``det A >= 1`` with equality exactly for
  pure Gaussian states.
* Two modes are described by a 4x4 covariance ``gamma = [[A, C], [C^T, B]]``
  and the symplectic form ``Omega = s (+) s`` in mode ordering
  ``(q1, p1, q2, p2)``.
* Entanglement tests: the Simon polynomial ``simon_value`` is positive exactly
  for entangled (two-mode Gaussian) states; ``nu_minus`` is the smallest
  symplectic eigenvalue of the partial transpose, below one exactly when
  ``simon_value`` is positive; ``negativity`` is the entanglement monotone
  built from it.
* ``p_function_witness`` decides whether the state admits a Gaussian
  Glauber--Sudarshan P-representation (a classical mixture of coherent
  states), which certifies separability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "S_BLOCK",
    "OMEGA_TWO_MODE",
    "MalformedMatrixError",
    "UncertaintyViolationError",
    "InconsistentCovarianceError",
    "CovarianceOneMode",
    "CovarianceTwoMode",
    "GaussianPRepresentation",
    "check_uncertainty",
    "is_pure_mode",
    "mode_number_expectation",
    "blocks",
    "trace_term",
    "simon_value",
    "simon_uncertainty_value",
    "nu_minus",
    "negativity",
    "partial_transpose",
    "p_function_witness",
    "weyl_expectation",
    "symplectic_eigenvalues",
    "random_two_mode_covariance",
]

#: Single-mode symplectic form.
S_BLOCK = np.array([[0.0, 1.0], [-1.0, 0.0]])

#: Two-mode symplectic form, mode ordering (q1, p1, q2, p2).
OMEGA_TWO_MODE = np.block(
    [[S_BLOCK, np.zeros((2, 2))], [np.zeros((2, 2)), S_BLOCK]]
)

#: Default tolerance for eigenvalue tests.
DEFAULT_TOL = 1e-10


class MalformedMatrixError(ValueError):
    """A covariance matrix has the wrong shape or is not symmetric."""


class UncertaintyViolationError(ValueError):
    """A covariance matrix violates the uncertainty relation."""


class InconsistentCovarianceError(ValueError):
    """Symplectic invariants are inconsistent (negative discriminant)."""


def _as_square(mat, size, what):
    arr = np.asarray(getattr(mat, "entries", getattr(mat, "gamma", mat)), dtype=float)
    if arr.shape != (size, size):
        raise MalformedMatrixError(f"{what} must be {size}x{size}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MalformedMatrixError(f"{what} contains non-finite entries")
    return arr


def _check_symmetric(arr, tol, what):
    scale = max(1.0, float(np.max(np.abs(arr))))
    asym = float(np.max(np.abs(arr - arr.T)))
    if asym > tol * scale:
        raise MalformedMatrixError(
            f"{what} is not symmetric: max |M - M^T| = {asym:.3e}"
        )


@dataclass(eq=False)
class CovarianceOneMode:
    """Covariance data of a single mode.

    Attributes
    ----------
    entries : (2, 2) array
        Symmetrized two-point matrix of the mode pair.
    one_point : (2,) array
        One-point (displacement) values; zero for vacuum/thermal states.
    """

    entries: np.ndarray
    one_point: np.ndarray = field(default=None)

    def __post_init__(self):
        self.entries = _as_square(self.entries, 2, "one-mode covariance")
        if self.one_point is None:
            self.one_point = np.zeros(2)
        self.one_point = np.asarray(self.one_point, dtype=float).reshape(2)


@dataclass(eq=False)
class CovarianceTwoMode:
    """Covariance data of an ordered pair of modes.

    Attributes
    ----------
    gamma : (4, 4) array
        Two-mode covariance matrix ``[[A, C], [C^T, B]]``.
    one_point : (4,) array
        One-point (displacement) values for (q1, p1, q2, p2).
    """

    gamma: np.ndarray
    one_point: np.ndarray = field(default=None)

    def __post_init__(self):
        self.gamma = _as_square(self.gamma, 4, "two-mode covariance")
        if self.one_point is None:
            self.one_point = np.zeros(4)
        self.one_point = np.asarray(self.one_point, dtype=float).reshape(4)

    @property
    def block_a(self):
        return self.gamma[:2, :2]

    @property
    def block_b(self):
        return self.gamma[2:, 2:]

    @property
    def block_c(self):
        return self.gamma[:2, 2:]


@dataclass(eq=False)
class GaussianPRepresentation:
    """Gaussian Glauber--Sudarshan P-function, when one exists.

    The density is ``normalization * exp(-z . precision_matrix . z / 2)``
    centred on ``shift`` over phase-space points z of the two modes.  A
    ``rank_deficient`` representation sits on the boundary (gamma - 1 is
    singular): the distribution degenerates onto a subspace and no finite
    precision matrix is stored.
    """

    normalization: float | None
    precision_matrix: np.ndarray | None
    shift: np.ndarray
    rank_deficient: bool = False


def _omega(dim):
    if dim == 2:
        return S_BLOCK
    if dim == 4:
        return OMEGA_TWO_MODE
    raise MalformedMatrixError(f"expected a 2x2 or 4x4 covariance, got {dim}x{dim}")


def _matrix_of(cov):
    if isinstance(cov, CovarianceOneMode):
        return cov.entries
    if isinstance(cov, CovarianceTwoMode):
        return cov.gamma
    arr = np.asarray(cov, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise MalformedMatrixError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def check_uncertainty(cov, tol=DEFAULT_TOL):
    """Test the uncertainty relation ``gamma + i*Omega >= 0``.

    Parameters
    ----------
    cov : CovarianceOneMode, CovarianceTwoMode, or square array
    tol : float
        Eigenvalues down to ``-tol`` are accepted as zero.

    Returns
    -------
    bool
        True when the smallest eigenvalue of the Hermitian matrix
        ``gamma + i*Omega`` is at least ``-tol``.
    """
    mat = _matrix_of(cov)
    _check_symmetric(mat, max(tol, DEFAULT_TOL), "covariance")
    omega = _omega(mat.shape[0])
    eigs = np.linalg.eigvalsh(mat + 1j * omega)
    return bool(eigs[0] >= -tol)


def is_pure_mode(a, tol=DEFAULT_TOL):
    """Return True when a one-mode covariance is pure (det A = 1).

    The matrix must satisfy the uncertainty relation; otherwise purity is
    meaningless and an :class:`UncertaintyViolationError` is raised.
    """
    mat = _matrix_of(a)
    if mat.shape != (2, 2):
        raise MalformedMatrixError("is_pure_mode expects a one-mode covariance")
    if not check_uncertainty(mat, tol):
        raise UncertaintyViolationError(
            "covariance violates the uncertainty relation; purity undefined"
        )
    return bool(abs(float(np.linalg.det(mat)) - 1.0) <= tol)


def mode_number_expectation(a):
    """Expected excitation number of a mode.

    Equals ``(tr A / 2 - 1) / 2`` plus the coherent contribution
    ``|one_point|^2 / 2``; zero exactly on (displacement-free) vacuum.
    """
    if isinstance(a, CovarianceOneMode):
        mat, chi = a.entries, a.one_point
    else:
        mat, chi = _matrix_of(a), np.zeros(2)
    return 0.5 * (0.5 * float(np.trace(mat)) - 1.0 + float(chi @ chi))


def blocks(gamma):
    """Split a two-mode covariance into its (A, B, C) blocks."""
    mat = _matrix_of(gamma)
    if mat.shape != (4, 4):
        raise MalformedMatrixError("expected a two-mode (4x4) covariance")
    return mat[:2, :2], mat[2:, 2:], mat[:2, 2:]


def trace_term(a, b, c):
    """The Simon cross term ``tr(A s C s B s C^T s)``."""
    s = S_BLOCK
    return float(np.trace(a @ s @ c @ s @ b @ s @ c.T @ s))


def _simon_polynomial(gamma, cross_sign):
    a, b, c = blocks(gamma)
    det_a = float(np.linalg.det(a))
    det_b = float(np.linalg.det(b))
    det_c = float(np.linalg.det(c))
    return (
        det_a
        + det_b
        - det_a * det_b
        + trace_term(a, b, c)
        - (1.0 + cross_sign * det_c) ** 2
    )


def simon_value(gamma):
    """Simon separability polynomial of a two-mode covariance.

    Positive exactly when the Gaussian state with this covariance is
    entangled; non-positive states are separable (two-mode Gaussian states
    have no bound entanglement).
    """
    return _simon_polynomial(gamma, +1.0)


def simon_uncertainty_value(gamma):
    """Partner polynomial with ``(1 - det C)^2``.

    Non-positive for every covariance satisfying the uncertainty relation;
    it is the same combination of invariants evaluated on the state itself
    rather than on its partial transpose.
    """
    return _simon_polynomial(gamma, -1.0)


def nu_minus(gamma, tol=DEFAULT_TOL):
    """Smallest symplectic eigenvalue of the partially transposed covariance.

    Below one exactly when the state is entangled.  Uses the invariant form
    ``nu^2 = (Delta - sqrt(Delta^2 - 4 I4)) / 2`` with
    ``Delta = det A + det B - 2 det C`` and
    ``I4 = det A det B + (det C)^2 - tr(A s C s B s C^T s)``.

    Raises
    ------
    InconsistentCovarianceError
        If the discriminant ``Delta^2 - 4 I4`` is negative beyond ``tol``
        (no real symplectic spectrum; the input is not a valid covariance).
    """
    a, b, c = blocks(gamma)
    det_a = float(np.linalg.det(a))
    det_b = float(np.linalg.det(b))
    det_c = float(np.linalg.det(c))
    delta = det_a + det_b - 2.0 * det_c
    i4 = det_a * det_b + det_c**2 - trace_term(a, b, c)
    disc = delta**2 - 4.0 * i4
    scale = max(1.0, delta**2, abs(i4))
    if disc < -tol * scale:
        raise InconsistentCovarianceError(
            f"negative symplectic discriminant {disc:.3e}; "
            "input is not a consistent covariance"
        )
    nu_sq = 0.5 * (delta - math.sqrt(max(disc, 0.0)))
    return math.sqrt(max(nu_sq, 0.0))


def negativity(gamma, tol=DEFAULT_TOL):
    """Entanglement negativity ``max(0, (1 - nu) / (2 nu))``; 0 if separable."""
    nu = nu_minus(gamma, tol)
    if nu <= 0.0:
        raise InconsistentCovarianceError(
            "vanishing symplectic eigenvalue; input is not a consistent covariance"
        )
    return max(0.0, (1.0 - nu) / (2.0 * nu))


def partial_transpose(gamma):
    """Partial transpose on the second mode: flips the sign of p2.

    Returns a new :class:`CovarianceTwoMode`; applying it twice restores the
    input exactly.
    """
    if isinstance(gamma, CovarianceTwoMode):
        mat, chi = gamma.gamma, gamma.one_point
    else:
        mat, chi = _matrix_of(gamma), np.zeros(4)
    lam = np.diag([1.0, 1.0, 1.0, -1.0])
    return CovarianceTwoMode(lam @ mat @ lam, lam @ chi)


def p_function_witness(gamma, tol=DEFAULT_TOL):
    """Gaussian P-representation of a two-mode state, when one exists.

    The state is a classical mixture of coherent states if and only if
    ``gamma - 1 >= 0``.  Returns the Gaussian density over phase space in
    that case (a separability certificate); ``None`` when ``gamma - 1`` has
    an eigenvalue below ``-tol`` (no Gaussian P-function; the state may be
    entangled or merely nonclassical).

    On the boundary (smallest eigenvalue within ``tol`` of zero) the
    representation degenerates: the returned object has ``rank_deficient``
    set and carries neither a precision matrix nor a normalization.
    """
    if isinstance(gamma, CovarianceTwoMode):
        mat, chi = gamma.gamma, gamma.one_point
    else:
        mat, chi = _matrix_of(gamma), np.zeros(4)
    excess = mat - np.eye(4)
    min_eig = float(np.linalg.eigvalsh(excess)[0])
    if min_eig < -tol:
        return None
    if min_eig <= tol:
        return GaussianPRepresentation(
            normalization=None,
            precision_matrix=None,
            shift=chi.copy(),
            rank_deficient=True,
        )
    det = float(np.linalg.det(excess))
    return GaussianPRepresentation(
        normalization=1.0 / (math.pi**2 * math.sqrt(det)),
        precision_matrix=np.linalg.inv(excess / 2.0),
        shift=chi.copy(),
        rank_deficient=False,
    )


def weyl_expectation(gamma, chi, xi):
    """Expectation of the Weyl operator at phase-space argument ``xi``.

    Returns ``exp(i chi . xi - xi . gamma . xi / 4)``; the modulus never
    exceeds one for positive semidefinite ``gamma``.
    """
    mat = _matrix_of(gamma)
    xi = np.asarray(xi, dtype=float).reshape(mat.shape[0])
    if chi is None:
        chi = np.zeros_like(xi)
    chi = np.asarray(chi, dtype=float).reshape(xi.shape)
    return complex(np.exp(1j * (chi @ xi) - 0.25 * (xi @ mat @ xi)))


def symplectic_eigenvalues(gamma):
    """Symplectic spectrum of a covariance (moduli of ``eig(i Omega gamma)``).

    Returns one value per mode, ascending.
    """
    mat = _matrix_of(gamma)
    omega = _omega(mat.shape[0])
    eigs = np.sort(np.abs(np.linalg.eigvals(1j * omega @ mat)))
    return eigs[::2]


def _random_orthogonal_symplectic(rng):
    """Random element of Sp(4, R) intersected with SO(4), mode ordering."""
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    x, y = q.real, q.imag
    k_qqpp = np.block([[x, -y], [y, x]])
    pos = [0, 2, 1, 3]  # (q1, p1, q2, p2) -> positions in (q1, q2, p1, p2)
    return k_qqpp[np.ix_(pos, pos)]


def random_two_mode_covariance(
    rng, max_squeeze=1.0, nu_max=3.0, mean_scale=0.0
):
    """Draw a random valid two-mode covariance.

    Built as ``S^T diag(nu1, nu1, nu2, nu2) S`` with ``S`` a random
    symplectic matrix from the Euler decomposition (orthogonal-symplectic x
    single-mode squeezers x orthogonal-symplectic), so the result satisfies
    the uncertainty relation by construction.

    Parameters
    ----------
    rng : numpy.random.Generator
    max_squeeze : float
        Squeezing exponents are drawn uniformly from [-max_squeeze, max_squeeze].
    nu_max : float
        Symplectic eigenvalues are drawn uniformly from [1, nu_max].
    mean_scale : float
        Standard deviation of the Gaussian one-point vector (0 = no shift).

    Returns
    -------
    CovarianceTwoMode
    """
    k1 = _random_orthogonal_symplectic(rng)
    k2 = _random_orthogonal_symplectic(rng)
    z1, z2 = np.exp(rng.uniform(-max_squeeze, max_squeeze, size=2))
    squeeze_qqpp = np.diag([z1, z2, 1.0 / z1, 1.0 / z2])
    pos = [0, 2, 1, 3]
    squeeze = squeeze_qqpp[np.ix_(pos, pos)]
    s = k1 @ squeeze @ k2
    nu1, nu2 = rng.uniform(1.0, nu_max, size=2)
    d = np.diag([nu1, nu1, nu2, nu2])
    mat = s.T @ d @ s
    mat = 0.5 * (mat + mat.T)
    chi = rng.normal(scale=mean_scale, size=4) if mean_scale > 0 else np.zeros(4)
    return CovarianceTwoMode(mat, chi)
