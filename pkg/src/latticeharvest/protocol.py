"""End-to-end entanglement harvesting between two local probe detectors.

A system field is coupled, with common strength ``lambda``, to two probe
fields inside compact coupling zones ``rho_a`` and ``rho_b``.  Each agent
accesses one local probe mode, a normalized pair of test functions
supported in a processing region that avoids the causal past of both
zones.  Pushing the mode pairs through the scattering map and evaluating
the initial product state yields the post-interaction two-mode covariance
blocks A(lambda), B(lambda), C(lambda), from which everything else
follows: the separability polynomial and negativity as functions of the
coupling (`sweep`), the smallest coupling at which entanglement appears
(`critical_coupling`), the small-coupling coefficients p0, p2, p4 of the
separability polynomial (`perturbative_coefficients`), and the
decomposition of a detector's particle-number signal into system and
probe contributions (`detector_signal`).

The same determinant/trace formulas are exposed at covariance-block level
(`covariance_from_blocks`, `simon_from_blocks`, `coefficients_from_blocks`,
`find_critical`) so they can be driven with externally supplied matrices,
independent of any PDE solving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    CausalGeometryError,
    CoupledSystem,
    DegenerateModeError,
    FieldOperatorSpec,
    LatticeSpec,
    TestFunction,
    TripleFunction,
    born_theta_terms,
    box_mask,
    causal_pairing,
    is_spacelike,
    make_bump,
    normalize_mode,
    theta_apply,
)
from .states import QuasiFreeState, beta_pair, causal_pair_mode_sum, one_point_pair
from .symplectic import (
    S_BLOCK,
    CovarianceTwoMode,
    check_uncertainty,
    negativity,
    nu_minus,
    simon_value,
    trace_term,
)

__all__ = [
    "SolverResolutionError",
    "UnsupportedExpansionError",
    "HarvestScenario",
    "SweepRow",
    "CriticalCouplingResult",
    "PerturbativeBlocks",
    "PerturbativeCoefficients",
    "ResidualReport",
    "DetectorSignal",
    "balanced_mode",
    "make_scenario",
    "assemble_blocks",
    "sweep",
    "find_critical",
    "critical_coupling",
    "covariance_from_blocks",
    "simon_from_blocks",
    "coefficients_from_blocks",
    "perturbative_blocks",
    "perturbative_coefficients",
    "perturbative_residual",
    "detector_signal",
    "standard_mode_family",
]

DEFAULT_UNCERTAINTY_TOL = 1e-8


class SolverResolutionError(RuntimeError):
    """Assembled covariance violates the uncertainty relation beyond tolerance.

    The interacting update preserves state positivity exactly; a violation
    beyond the tolerance indicates accumulated discretization error.
    Refining the lattice (smaller dx, dt) resolves it.
    """


class UnsupportedExpansionError(ValueError):
    """The small-coupling expansion was requested outside its domain."""


# ----------------------------------------------------------------- scenario ---

@dataclass(eq=False)
class HarvestScenario:
    """Validated inputs of one harvesting experiment.

    Build through `make_scenario`, which normalizes the modes and checks
    the geometry; the fields are then treated as read-only.
    """

    lattice: LatticeSpec
    system_op: FieldOperatorSpec
    probe_a_op: FieldOperatorSpec
    probe_b_op: FieldOperatorSpec
    rho_a: TestFunction
    rho_b: TestFunction
    mode_a: tuple
    mode_b: tuple
    system_state: QuasiFreeState
    probe_a_state: QuasiFreeState
    probe_b_state: QuasiFreeState
    lambda_grid: np.ndarray

    def coupled(self, coupling):
        """The coupled dynamics at a given coupling strength."""
        return CoupledSystem(
            self.lattice,
            self.system_op,
            self.probe_a_op,
            self.probe_b_op,
            self.rho_a,
            self.rho_b,
            coupling=float(coupling),
        )

    @property
    def slot_states(self):
        """States in (system, probe A, probe B) slot order."""
        return (self.system_state, self.probe_a_state, self.probe_b_state)


def _same_operator(op1, op2):
    if op1.mass != op2.mass:
        return False
    p1, p2 = op1.potential, op2.potential
    if (p1 is None) != (p2 is None):
        return False
    return p1 is None or np.array_equal(p1, p2)


def make_scenario(
    lattice,
    system_op,
    probe_a_op,
    probe_b_op,
    rho_a,
    rho_b,
    mode_a,
    mode_b,
    system_state,
    probe_a_state,
    probe_b_state,
    lambda_grid,
):
    """Validate and assemble a `HarvestScenario`.

    Normalizes both mode pairs to unit commutator, checks that every mode
    function is supported outside the causal past of the coupling zones,
    that the states live on this lattice with the matching field
    operators, and that the coupling grid is ascending and nonnegative.

    Raises
    ------
    CausalGeometryError
        If a mode function intersects the causal past of a coupling zone.
    DegenerateModeError
        If a mode pair has (numerically) vanishing commutator.
    ValueError
        For grid or state/operator mismatches.
    """
    grid = np.asarray(lambda_grid, dtype=float).reshape(-1)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("lambda grid must be a nonempty finite sequence")
    if grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be ascending and nonnegative")

    probe_ops = {"a": probe_a_op, "b": probe_b_op}
    states = {
        "system": (system_state, system_op),
        "probe a": (probe_a_state, probe_a_op),
        "probe b": (probe_b_state, probe_b_op),
    }
    for name, (state, op) in states.items():
        if state.lattice != lattice:
            raise ValueError(f"{name} state lives on a different lattice")
        if not _same_operator(state.operator, op):
            raise ValueError(
                f"{name} state was built for a different field operator"
            )

    mode_a = normalize_mode(probe_a_op, *mode_a)
    mode_b = normalize_mode(probe_b_op, *mode_b)

    interaction_past = CoupledSystem(
        lattice, system_op, probe_a_op, probe_b_op, rho_a, rho_b
    ).interaction_past()
    for label, pair in (("mode_a", mode_a), ("mode_b", mode_b)):
        for j, f in enumerate(pair, start=1):
            if np.any(box_mask(lattice, f.support_box) & interaction_past):
                raise CausalGeometryError(
                    f"{label} function {j} is supported inside the causal "
                    "past of the coupling zones; processing regions must "
                    "avoid it"
                )

    return HarvestScenario(
        lattice=lattice,
        system_op=system_op,
        probe_a_op=probe_a_op,
        probe_b_op=probe_b_op,
        rho_a=rho_a,
        rho_b=rho_b,
        mode_a=mode_a,
        mode_b=mode_b,
        system_state=system_state,
        probe_a_state=probe_a_state,
        probe_b_state=probe_b_state,
        lambda_grid=grid,
    )


# ----------------------------------------------------------- block assembly ---

def _centered_pair(state, u, v):
    """beta(u, v) - 2 chi(u) chi(v): one covariance contribution."""
    value = beta_pair(state, u, v)
    chi_u = one_point_pair(state, u)
    if chi_u != 0.0:
        value -= 2.0 * chi_u * one_point_pair(state, v)
    return value


def _covariance_entry(slot_states, image_1, image_2):
    """Sum the slotwise covariance contributions of two scattered sources."""
    total = 0.0
    for state, c1, c2 in zip(slot_states, image_1.components, image_2.components):
        if np.any(c1) and np.any(c2):
            total += _centered_pair(state, c1, c2)
    return total


def _one_point_total(slot_states, image):
    return sum(
        one_point_pair(state, comp)
        for state, comp in zip(slot_states, image.components)
        if np.any(comp)
    )


def _scattered_modes(scenario, coupling):
    coupled = scenario.coupled(coupling)
    image_a = [
        theta_apply(coupled, TripleFunction.single_slot(f, "probe_a"))
        for f in scenario.mode_a
    ]
    image_b = [
        theta_apply(coupled, TripleFunction.single_slot(f, "probe_b"))
        for f in scenario.mode_b
    ]
    return image_a, image_b


def assemble_blocks(scenario, coupling, tol=DEFAULT_UNCERTAINTY_TOL):
    """Post-interaction two-mode covariance at one coupling strength.

    Pushes the four mode functions through the scattering map, then forms
    A_jk, B_jk, C_jk as sums over the (system, probe A, probe B) slots of
    the centered symmetrized two-point values, one term per slot.  All
    three terms are always evaluated, so zones that are not spacelike
    separated are handled as well.

    Raises
    ------
    SolverResolutionError
        If the assembled covariance fails the uncertainty check beyond
        ``tol``.
    """
    image_a, image_b = _scattered_modes(scenario, coupling)
    states = scenario.slot_states
    a = np.empty((2, 2))
    b = np.empty((2, 2))
    c = np.empty((2, 2))
    for j in range(2):
        for k in range(j, 2):
            a[j, k] = a[k, j] = _covariance_entry(states, image_a[j], image_a[k])
            b[j, k] = b[k, j] = _covariance_entry(states, image_b[j], image_b[k])
    for j in range(2):
        for k in range(2):
            c[j, k] = _covariance_entry(states, image_a[j], image_b[k])
    one_point = np.array(
        [_one_point_total(states, image) for image in (*image_a, *image_b)]
    )
    cov = covariance_from_blocks(a, b, c, one_point)
    if not check_uncertainty(cov, tol):
        raise SolverResolutionError(
            f"assembled covariance at coupling {coupling:g} violates the "
            f"uncertainty relation beyond {tol:g}; refine the lattice "
            "(smaller dx and dt) or relax the tolerance"
        )
    return cov


def covariance_from_blocks(a, b, c, one_point=None):
    """Two-mode covariance [[A, C], [C^T, B]] from its blocks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    gamma = np.block([[a, c], [c.T, b]])
    return CovarianceTwoMode(gamma, one_point)


def simon_from_blocks(a, b, c):
    """Separability polynomial evaluated directly on covariance blocks."""
    return simon_value(covariance_from_blocks(a, b, c).gamma)


# ------------------------------------------------------------------- sweeps ---

@dataclass(eq=False)
class SweepRow:
    """Entanglement summary of the post-interaction state at one coupling."""

    coupling: float
    p_s: float
    nu_minus: float
    negativity: float
    det_a: float
    det_b: float
    det_c: float
    trace_term: float


def _row_from_covariance(coupling, cov):
    a, b, c = cov.block_a, cov.block_b, cov.block_c
    nu = nu_minus(cov)
    return SweepRow(
        coupling=float(coupling),
        p_s=simon_value(cov),
        nu_minus=nu,
        negativity=negativity(cov),
        det_a=float(np.linalg.det(a)),
        det_b=float(np.linalg.det(b)),
        det_c=float(np.linalg.det(c)),
        trace_term=trace_term(a, b, c),
    )


def sweep(scenario, tol=DEFAULT_UNCERTAINTY_TOL):
    """Evaluate the entanglement summary on the scenario's coupling grid.

    Returns one `SweepRow` per grid point, in grid order.  The rows are a
    pure function of the scenario: repeated runs produce identical values.
    """
    return [
        _row_from_covariance(lam, assemble_blocks(scenario, lam, tol))
        for lam in scenario.lambda_grid
    ]


# -------------------------------------------------------- critical coupling ---

@dataclass(eq=False)
class CriticalCouplingResult:
    """Outcome of the smallest-entangling-coupling search.

    ``value`` is None when the polynomial stays nonpositive on the whole
    interval, 0.0 in the pure-probe edge case (positive already at the
    smallest scanned coupling with p_S(0) = 0), and the bracketed root
    otherwise.  ``multiple_crossings`` flags additional sign changes on
    the scan grid beyond the reported one.
    """

    value: float | None
    multiple_crossings: bool
    scan_couplings: np.ndarray
    scan_values: np.ndarray


def find_critical(p_fn, scan_grid, tol=1e-4, zero_tol=1e-10):
    """Locate the smallest coupling where a continuous curve turns positive.

    Scans ``p_fn`` over the ascending ``scan_grid`` (zero is prepended if
    absent) to bracket the first sign change from <= 0 to > 0, then
    bisects the bracket until its width is below ``tol`` relative to the
    crossing.  A curve already positive at the smallest positive grid
    point resolves to 0.0 — the threshold-free edge case, reached by
    valid states only with |p_fn(0)| <= ``zero_tol``.
    """
    grid = np.asarray(scan_grid, dtype=float).reshape(-1)
    if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("scan grid must be ascending, nonnegative, size >= 2")
    if grid[0] > 0:
        grid = np.concatenate([[0.0], grid])
    values = np.array([p_fn(lam) for lam in grid])

    brackets = [
        i for i in range(len(grid) - 1) if values[i] <= 0.0 < values[i + 1]
    ]
    if values[1] > 0.0 and abs(values[0]) <= zero_tol:
        # positive already at the smallest positive coupling with p(0) = 0
        # (up to zero_tol): entanglement without threshold
        later = [i for i in brackets if i > 0]
        return CriticalCouplingResult(0.0, len(later) > 0, grid, values)
    if not brackets:
        return CriticalCouplingResult(None, False, grid, values)

    lo, hi = grid[brackets[0]], grid[brackets[0] + 1]
    width_floor = 1e-15 * grid[-1]
    while (hi - lo) > max(tol * hi, width_floor):
        mid = 0.5 * (lo + hi)
        if p_fn(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return CriticalCouplingResult(
        float(0.5 * (lo + hi)), len(brackets) > 1, grid, values
    )


def critical_coupling(
    scenario,
    search_interval=None,
    tol=1e-4,
    uncertainty_tol=DEFAULT_UNCERTAINTY_TOL,
):
    """Smallest coupling in range at which the state becomes entangled.

    Scans the separability polynomial over the scenario's coupling grid
    (restricted to ``search_interval`` when given) and bisects the first
    nonpositive-to-positive crossing to relative tolerance ``tol``.
    The scenario grid doubles as the scan density; see `find_critical`
    for the edge cases.
    """
    grid = scenario.lambda_grid
    if search_interval is not None:
        lo, hi = (float(v) for v in search_interval)
        if not (0 <= lo < hi):
            raise ValueError("search interval must satisfy 0 <= low < high")
        inside = grid[(grid >= lo) & (grid <= hi)]
        # keep scan density even when the interval misses the scenario grid
        grid = np.unique(np.concatenate([np.linspace(lo, hi, 9), inside]))

    def p_fn(lam):
        return simon_value(assemble_blocks(scenario, lam, uncertainty_tol))

    return find_critical(p_fn, grid, tol)


# ------------------------------------------------------ perturbative branch ---

@dataclass(eq=False)
class PerturbativeBlocks:
    """Covariance-block coefficients of the small-coupling expansion.

    A(lambda) = A0 + lambda^2 A2 + lambda^4 A4 + O(lambda^6) and likewise
    for B; C(lambda) = lambda^2 C2 + O(lambda^4).
    """

    a0: np.ndarray
    a2: np.ndarray
    a4: np.ndarray
    b0: np.ndarray
    b2: np.ndarray
    b4: np.ndarray
    c2: np.ndarray


@dataclass(eq=False)
class PerturbativeCoefficients:
    """Small-coupling coefficients of the separability polynomial.

    p_S(lambda) = p0 + lambda^2 p2 + lambda^4 p4 + O(lambda^6); p4_tilde
    is the matching coefficient of the uncertainty-bound polynomial,
    p4_tilde = p4 + 4 det C2.
    """

    p0: float
    p2: float
    p4: float
    p4_tilde: float

    def evaluate(self, coupling):
        """Truncated polynomial p0 + c^2 p2 + c^4 p4."""
        lam2 = float(coupling) ** 2
        return self.p0 + lam2 * self.p2 + lam2 * lam2 * self.p4


def _block_order(slot_states, terms_j, terms_k, order):
    """Coefficient of coupling^order in the covariance entry of two modes."""
    total = 0.0
    for p in range(order + 1):
        total += _covariance_entry(slot_states, terms_j[p], terms_k[order - p])
    return total


def perturbative_blocks(scenario, tol_spacelike=None):
    """Expansion blocks A0, A2, A4, B0, B2, B4, C2 from the scattering series.

    Requires spacelike separated coupling zones: only then does the cross
    block C start at second order, which the coefficient formulas assume.

    Raises
    ------
    UnsupportedExpansionError
        If the coupling zones are not spacelike separated.
    """
    lattice = scenario.lattice
    if not is_spacelike(lattice, scenario.rho_a.support_box, scenario.rho_b.support_box):
        raise UnsupportedExpansionError(
            "the small-coupling expansion assumes spacelike separated "
            "coupling zones (cross correlations starting at second order)"
        )
    coupled = scenario.coupled(0.0)
    terms_a = [born_theta_terms(coupled, f, "a") for f in scenario.mode_a]
    terms_b = [born_theta_terms(coupled, f, "b") for f in scenario.mode_b]
    states = scenario.slot_states

    def block(terms_1, terms_2, order):
        out = np.empty((2, 2))
        for j in range(2):
            for k in range(2):
                out[j, k] = _block_order(states, terms_1[j], terms_2[k], order)
        return out

    return PerturbativeBlocks(
        a0=block(terms_a, terms_a, 0),
        a2=block(terms_a, terms_a, 2),
        a4=block(terms_a, terms_a, 4),
        b0=block(terms_b, terms_b, 0),
        b2=block(terms_b, terms_b, 2),
        b4=block(terms_b, terms_b, 4),
        c2=block(terms_a, terms_b, 2),
    )


def coefficients_from_blocks(blocks):
    """Expansion coefficients of the separability polynomial from blocks.

    Determinant and trace expansions of p_S through fourth order:
    p0 = -(det A0 - 1)(det B0 - 1),
    p2 = (1 - det A0) det B0 tr(B0^-1 B2) + (1 - det B0) det A0 tr(A0^-1 A2),
    p4 = tr(A0 s C2 s B0 s C2^T s) - 2 det C2
         - det A0 det B0 tr(A0^-1 A2) tr(B0^-1 B2)
         + (1 - det B0)(det A2 + det A0 tr(A0^-1 A4))
         + (1 - det A0)(det B2 + det B0 tr(B0^-1 B4)).
    """
    a0, b0 = blocks.a0, blocks.b0
    det_a0 = float(np.linalg.det(a0))
    det_b0 = float(np.linalg.det(b0))
    tr_a2 = float(np.trace(np.linalg.solve(a0, blocks.a2)))
    tr_b2 = float(np.trace(np.linalg.solve(b0, blocks.b2)))
    tr_a4 = float(np.trace(np.linalg.solve(a0, blocks.a4)))
    tr_b4 = float(np.trace(np.linalg.solve(b0, blocks.b4)))
    det_c2 = float(np.linalg.det(blocks.c2))

    p0 = -(det_a0 - 1.0) * (det_b0 - 1.0)
    p2 = (1.0 - det_a0) * det_b0 * tr_b2 + (1.0 - det_b0) * det_a0 * tr_a2
    s = S_BLOCK
    cross = float(np.trace(a0 @ s @ blocks.c2 @ s @ b0 @ s @ blocks.c2.T @ s))
    p4 = (
        cross
        - 2.0 * det_c2
        - det_a0 * det_b0 * tr_a2 * tr_b2
        + (1.0 - det_b0) * (float(np.linalg.det(blocks.a2)) + det_a0 * tr_a4)
        + (1.0 - det_a0) * (float(np.linalg.det(blocks.b2)) + det_b0 * tr_b4)
    )
    return PerturbativeCoefficients(p0=p0, p2=p2, p4=p4, p4_tilde=p4 + 4.0 * det_c2)


def perturbative_coefficients(scenario):
    """Small-coupling coefficients p0, p2, p4 of the scenario's polynomial."""
    return coefficients_from_blocks(perturbative_blocks(scenario))


@dataclass(eq=False)
class ResidualReport:
    """Fourth-order truncation residuals against the full pipeline.

    ``slope`` is the log-log regression slope of the residual over the
    couplings where it exceeds ``noise_floor`` (None when fewer than two
    such points exist, in which case ``inconclusive`` is set: the
    truncation is exact to within numerical noise on this grid).
    """

    slope: float | None
    inconclusive: bool
    couplings: np.ndarray
    residuals: np.ndarray
    included: np.ndarray
    noise_floor: float
    coefficients: PerturbativeCoefficients


def perturbative_residual(
    scenario,
    small_lambda_grid=None,
    noise_floor=None,
    uncertainty_tol=DEFAULT_UNCERTAINTY_TOL,
):
    """Scaling of |p_S(lambda) - (p0 + lambda^2 p2 + lambda^4 p4)|.

    The truncation error of the fourth-order expansion is sixth order, so
    on a grid inside the small-coupling regime (default geomspace
    [1e-3, 1e-2]) the log-log slope of the residual is about 6.  Residual
    values at or below the numerical noise floor are excluded from the
    regression; when everything is excluded the report is flagged
    inconclusive rather than failed.  The default noise floor is
    calibrated from the zero-coupling mismatch of the two pipelines.
    """
    if small_lambda_grid is None:
        small_lambda_grid = np.geomspace(1e-3, 1e-2, 6)
    grid = np.asarray(small_lambda_grid, dtype=float).reshape(-1)
    coeffs = perturbative_coefficients(scenario)
    p_zero = simon_value(assemble_blocks(scenario, 0.0, uncertainty_tol))
    if noise_floor is None:
        scale = max(1.0, abs(coeffs.p0))
        noise_floor = max(10.0 * abs(p_zero - coeffs.p0), 1e-13 * scale)

    residuals = np.empty_like(grid)
    for i, lam in enumerate(grid):
        p_full = simon_value(assemble_blocks(scenario, lam, uncertainty_tol))
        residuals[i] = abs(p_full - coeffs.evaluate(lam))
    included = residuals > noise_floor
    if np.count_nonzero(included) < 2:
        return ResidualReport(
            slope=None,
            inconclusive=True,
            couplings=grid,
            residuals=residuals,
            included=included,
            noise_floor=noise_floor,
            coefficients=coeffs,
        )
    slope = float(
        np.polyfit(np.log(grid[included]), np.log(residuals[included]), 1)[0]
    )
    return ResidualReport(
        slope=slope,
        inconclusive=False,
        couplings=grid,
        residuals=residuals,
        included=included,
        noise_floor=noise_floor,
        coefficients=coeffs,
    )


# ---------------------------------------------------------- detector signal ---

@dataclass(eq=False)
class DetectorSignal:
    """Number-operator signal of one detector, split by origin.

    ``total = system_part + probe_part`` exactly: the first term is the
    system's contribution through the scattered mode, the second the
    detector's own initial fluctuations.
    """

    total: float
    system_part: float
    probe_part: float


def _number_part(state, comp_1, comp_2):
    """Expectation of psi(conj(h)) psi(h) for h = (c1 + i c2)/sqrt(2)."""
    value = 0.25 * (
        _centered_pair(state, comp_1, comp_1)
        + _centered_pair(state, comp_2, comp_2)
    )
    value -= 0.5 * causal_pair_mode_sum(state, comp_1, comp_2)
    chi_1 = one_point_pair(state, comp_1)
    chi_2 = one_point_pair(state, comp_2)
    if chi_1 != 0.0 or chi_2 != 0.0:
        value += 0.5 * (chi_1 * chi_1 + chi_2 * chi_2)
    return value


def detector_signal(scenario, coupling, which_probe):
    """Decompose one detector's particle-number signal at one coupling.

    Views the scenario with only the chosen probe coupled (the other
    coupling zone is zeroed), scatters that probe's mode pair, and
    evaluates the number expectation of the mode.  The system part is the
    signal proper; the probe part is present even at zero coupling — it
    is the noise term contributed by the probe's own initial state.
    """
    if which_probe not in ("a", "b"):
        raise ValueError(f"which_probe must be 'a' or 'b', got {which_probe!r}")
    keep_a = which_probe == "a"
    coupled = CoupledSystem(
        scenario.lattice,
        scenario.system_op,
        scenario.probe_a_op,
        scenario.probe_b_op,
        scenario.rho_a if keep_a else scenario.rho_a.scaled(0.0),
        scenario.rho_b if not keep_a else scenario.rho_b.scaled(0.0),
        coupling=float(coupling),
    )
    mode = scenario.mode_a if keep_a else scenario.mode_b
    slot = "probe_a" if keep_a else "probe_b"
    probe_state = scenario.probe_a_state if keep_a else scenario.probe_b_state
    images = [
        theta_apply(coupled, TripleFunction.single_slot(f, slot)) for f in mode
    ]
    probe_comps = [getattr(image, slot) for image in images]
    system_part = _number_part(
        scenario.system_state, images[0].system, images[1].system
    )
    probe_part = _number_part(probe_state, probe_comps[0], probe_comps[1])
    return DetectorSignal(
        total=system_part + probe_part,
        system_part=system_part,
        probe_part=probe_part,
    )


# -------------------------------------------------------------- mode family ---

def balanced_mode(op, f1, f2, tol=1e-8):
    """Normalize a raw mode pair to unit commutator with balanced scales.

    `normalize_mode` puts the whole rescaling 1/E(f1, f2) on the second
    function, so a raw pair with a small commutator comes out with the
    two functions at wildly different amplitudes.  Every derived
    two-mode quantity is invariant under that choice of basis, but the
    intermediate block assembly is not: a large scale disparity wastes
    floating-point range.  This helper splits the rescaling evenly —
    both functions are scaled by |E(f1, f2)|^(-1/2) — before the final
    `normalize_mode`, which then only removes residual roundoff.
    """
    e = causal_pairing(op, f1, f2)
    if abs(e) <= tol:
        raise DegenerateModeError(
            f"|E(f1, f2)| = {abs(e):.3e} <= {tol}; mode pair is degenerate"
        )
    s = 1.0 / np.sqrt(abs(e))
    return normalize_mode(op, f1.scaled(np.copysign(s, e)), f2.scaled(s), tol=tol)


def standard_mode_family(op, lattice, count=10, center=None):
    """Deterministic family of normalized compactly supported mode pairs.

    Each member is a pair (f1, f2) of time-shifted smooth bumps around a
    common center, with radii varying across the family and a spatial
    cosine modulation on the odd members; all pairs are normalized to
    unit commutator.  Restricting a field state to any such strictly
    local mode yields a genuinely mixed one-mode state.
    """
    if count < 1:
        raise ValueError("count must be positive")
    t_total = lattice.total_time
    circumference = lattice.circumference
    if center is None:
        center = (0.45 * t_total, 0.5 * circumference)
    t_c, x_c = center
    pairs = []
    for i in range(count):
        r_t = 0.045 * t_total * (1.0 + 0.08 * (i % 4))
        r_x = 0.06 * circumference * (1.0 + 0.06 * ((i + 1) % 3))
        shift = 0.9 * r_t
        f1 = make_bump(lattice, (t_c - 0.5 * shift, x_c), (r_t, r_x), 1.0)
        f2 = make_bump(lattice, (t_c + 0.5 * shift, x_c), (r_t, r_x), 1.0)
        if i % 2 == 1:
            wavenumber = 2.0 * np.pi * (1 + i // 2) / circumference
            modulation = np.cos(wavenumber * (lattice.xs - x_c))
            f2 = type(f2).from_values(lattice, f2.values * modulation)
        pairs.append(balanced_mode(op, f1, f2))
    return pairs
