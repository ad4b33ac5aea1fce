"""Quasi-free (Gaussian) states of the lattice field via dense mode sums.

A static Klein--Gordon operator on the spatial circle defines frequencies and
orthonormal mode shapes through one dense symmetric eigensolve.  Vacuum and
thermal two-point functions are mode sums over continuous-in-time phases
``exp(i omega t)`` with per-mode weights (1 for vacuum, ``coth(omega / 2T)``
for temperature T); the imaginary part of the same sum is the commutator
pairing, giving an independent route to the causal propagator of the lattice
module.

``explicit`` states carry user-supplied two-point and one-point evaluators
instead of mode data (useful for injecting deliberately corrupted or exotic
states into the diagnostics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import TestFunction, causal_pairing, make_bump
from .symplectic import S_BLOCK, CovarianceOneMode

__all__ = [
    "SpectrumError",
    "StateConsistencyError",
    "QuasiFreeState",
    "PositivityReport",
    "build_state",
    "mode_projection",
    "beta_pair",
    "causal_pair_mode_sum",
    "one_point_pair",
    "restrict_covariance",
    "validate_positivity",
]


class SpectrumError(ValueError):
    """The spatial operator has a non-positive eigenvalue (infrared zero
    mode or tachyonic potential); no stable quasi-free state exists."""


class StateConsistencyError(ValueError):
    """A restricted covariance violates the uncertainty relation beyond
    tolerance: state data and solver data are inconsistent."""


@dataclass(eq=False)
class QuasiFreeState:
    """Quasi-free state data for one field species.

    For kinds 'vacuum' and 'thermal', ``omegas`` (ascending), ``eigvecs``
    (orthonormal columns of the spatial operator) and ``weights`` define the
    mode sum; ``phases[n, i] = exp(i omegas[i] * t_n)`` is precomputed.  For
    kind 'explicit' the evaluators ``beta_fn(f, g)``, ``chi_fn(f)`` and
    ``commutator_fn(f, g)`` are used instead.
    """

    kind: str
    lattice: object
    operator: object
    temperature: float | None = None
    omegas: np.ndarray | None = None
    eigvecs: np.ndarray | None = None
    weights: np.ndarray | None = None
    phases: np.ndarray | None = None
    beta_fn: object = field(default=None, repr=False)
    chi_fn: object = field(default=None, repr=False)
    commutator_fn: object = field(default=None, repr=False)


def _spatial_operator_matrix(operator, lattice):
    n, dx = lattice.n_space, lattice.dx
    mat = np.zeros((n, n))
    idx = np.arange(n)
    mat[idx, idx] = 2.0 / dx**2 + operator.squared_mass_profile(lattice)
    mat[idx, (idx + 1) % n] = -1.0 / dx**2
    mat[idx, (idx - 1) % n] = -1.0 / dx**2
    return mat


def build_state(kind, operator, lattice, temperature=None,
                beta_fn=None, chi_fn=None, commutator_fn=None):
    """Construct a quasi-free state of the field ``operator`` on ``lattice``.

    Parameters
    ----------
    kind : str
        'vacuum', 'thermal' (requires ``temperature`` > 0) or 'explicit'
        (requires ``beta_fn``; ``chi_fn`` defaults to zero and
        ``commutator_fn`` to the lattice causal pairing).
    operator : FieldOperatorSpec
    lattice : LatticeSpec
    temperature : float, optional

    Raises
    ------
    SpectrumError
        If the spatial operator has a non-positive eigenvalue (e.g. a
        massless free field, whose constant mode has frequency zero).
    """
    if kind == "explicit":
        if beta_fn is None:
            raise ValueError("explicit states require a beta_fn evaluator")
        return QuasiFreeState(
            kind="explicit",
            lattice=lattice,
            operator=operator,
            beta_fn=beta_fn,
            chi_fn=chi_fn,
            commutator_fn=commutator_fn
            or (lambda f, g: causal_pairing(operator, f, g)),
        )
    if kind not in ("vacuum", "thermal"):
        raise ValueError(f"unknown state kind {kind!r}")
    evals, evecs = np.linalg.eigh(_spatial_operator_matrix(operator, lattice))
    # An eigenvalue at or below eigensolver resolution (e.g. the exact zero
    # mode of a massless field on a periodic lattice, which roundoff places at
    # +-1e-14) cannot support a reliable 1/omega, so reject it relative to the
    # spectral scale rather than against literal zero.
    if evals[0] <= 1e-12 * max(1.0, float(evals[-1])):
        raise SpectrumError(
            f"smallest frequency-squared is {evals[0]:.6g}; the spatial "
            "operator must be strictly positive (add mass or a confining "
            "potential)"
        )
    omegas = np.sqrt(evals)
    if kind == "thermal":
        if temperature is None or not (temperature > 0 and np.isfinite(temperature)):
            raise ValueError(f"thermal states require temperature > 0, got {temperature}")
        weights = 1.0 / np.tanh(omegas / (2.0 * temperature))
    else:
        temperature = None
        weights = np.ones_like(omegas)
    phases = np.exp(1j * np.outer(lattice.times, omegas))
    return QuasiFreeState(
        kind=kind,
        lattice=lattice,
        operator=operator,
        temperature=temperature,
        omegas=omegas,
        eigvecs=evecs,
        weights=weights,
        phases=phases,
    )


def _values_of(f):
    return f.values if isinstance(f, TestFunction) else np.asarray(f, dtype=float)


def mode_projection(state, f):
    """Positive-frequency mode amplitudes of a spacetime source.

    Returns the complex vector ``fhat_i = dt * sum_t exp(i omega_i t) *
    (phi_i, f(t, .))`` with continuum-normalized mode shapes
    ``phi_i = v_i / sqrt(dx)``.
    """
    if state.kind == "explicit":
        raise ValueError("explicit states carry no mode data")
    values = _values_of(f)
    proj = values @ state.eigvecs  # (n_time, n_modes), Euclidean components
    scale = state.lattice.dt * math.sqrt(state.lattice.dx)
    return scale * np.sum(state.phases * proj, axis=0)


def beta_pair(state, f, g):
    """Symmetrized two-point value beta(f, g) of the state.

    Mode-sum form ``2 Re sum_i w_i conj(fhat_i) ghat_i / (2 omega_i)`` for
    vacuum/thermal states; delegates to the stored evaluator for explicit
    states.  Bilinear and symmetric in its arguments.
    """
    if state.kind == "explicit":
        return float(state.beta_fn(f, g))
    fh = mode_projection(state, f)
    gh = mode_projection(state, g)
    return float(np.sum(state.weights * (np.conj(fh) * gh).real / state.omegas))


def causal_pair_mode_sum(state, f, g):
    """Commutator pairing E(f, g) via the mode sum (weight-free imaginary part).

    Independent of temperature; agrees with the lattice-solver route
    ``causal_pairing`` up to the solver error.
    """
    if state.kind == "explicit":
        return float(state.commutator_fn(f, g))
    fh = mode_projection(state, f)
    gh = mode_projection(state, g)
    return float(np.sum((np.conj(fh) * gh).imag / state.omegas))


def one_point_pair(state, f):
    """One-point value chi(f); zero for vacuum and thermal states."""
    if state.kind == "explicit" and state.chi_fn is not None:
        return float(state.chi_fn(f))
    return 0.0


def restrict_covariance(state, f1, f2, tol=1e-8):
    """One-mode covariance of the state restricted to a normalized mode pair.

    ``A_jk = beta(f_j, f_k)`` with one-point vector ``(chi(f_1), chi(f_2))``.
    The pair must be normalized (unit commutator); then the uncertainty
    relation requires ``A + i s >= 0``, which is verified up to ``tol``.

    Raises
    ------
    StateConsistencyError
        If ``A + i s`` has an eigenvalue below ``-tol``; this signals an
        unnormalized mode pair or inconsistent state/solver data.
    """
    b11 = beta_pair(state, f1, f1)
    b12 = beta_pair(state, f1, f2)
    b22 = beta_pair(state, f2, f2)
    entries = np.array([[b11, b12], [b12, b22]])
    min_eig = float(np.linalg.eigvalsh(entries + 1j * S_BLOCK)[0])
    if min_eig < -tol:
        raise StateConsistencyError(
            f"restricted covariance violates the uncertainty relation "
            f"(min eig {min_eig:.3e} < -{tol}); mode pair unnormalized or "
            "state/solver data inconsistent"
        )
    chi = np.array([one_point_pair(state, f1), one_point_pair(state, f2)])
    return CovarianceOneMode(entries, chi)


@dataclass(eq=False)
class PositivityReport:
    """Result of sampling the two-point positivity inequality."""

    max_relative_violation: float
    passed: bool
    sample_count: int
    seed: int
    tolerance: float


def _random_bump(lattice, rng):
    nt, nx = lattice.n_time, lattice.n_space
    dt, dx = lattice.dt, lattice.dx
    r_t = rng.uniform(4 * dt, max(min(0.15 * nt, 30) * dt, 5 * dt))
    r_x = rng.uniform(4 * dx, max(min(0.15 * nx, 30) * dx, 5 * dx))
    t_c = rng.uniform(dt + r_t, (nt - 2) * dt - r_t)
    x_c = rng.uniform(r_x, nx * dx - r_x)
    return make_bump(lattice, (t_c, x_c), (r_t, r_x), 1.0)


def validate_positivity(state, sample_count=100, seed=0, tol=1e-6):
    """Sample the positivity inequality |E(f,g)|^2 <= beta(f,f) beta(g,g).

    Draws ``sample_count`` random bump pairs (seeded) and reports the
    largest relative violation.  For healthy vacuum/thermal states the
    inequality holds to rounding error; a corrupted two-point function
    (e.g. beta scaled down) shows up as an O(1) violation.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(sample_count):
        f = _random_bump(state.lattice, rng)
        g = _random_bump(state.lattice, rng)
        bff = beta_pair(state, f, f)
        bgg = beta_pair(state, g, g)
        e = causal_pair_mode_sum(state, f, g)
        scale = max(abs(bff * bgg), 1e-300)
        violation = (e * e - bff * bgg) / scale
        worst = max(worst, violation)
    return PositivityReport(
        max_relative_violation=worst,
        passed=bool(worst <= tol),
        sample_count=sample_count,
        seed=seed,
        tolerance=tol,
    )
