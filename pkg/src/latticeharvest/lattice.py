"""Periodic 1+1D lattice field: test functions, Green operators, scattering map.

The spatial domain is a circle of ``n_space`` sites with spacing ``dx``; time
is a window of ``n_time`` slices with step ``dt`` subject to the Courant
condition ``dt/dx <= 1``.  The field operator is the discrete Klein--Gordon
operator ``P = d_tt - Laplacian + mass^2 + potential(x)``.

Retarded and advanced Green operators are realized by explicit leapfrog
(second order in both steps).  The scattering map ``theta = 1 - C E_T^-``
couples a system field to two probe fields through local coupling functions
``rho_a, rho_b`` (the off-diagonal block ``C`` of the coupled operator) and
acts as the identity on data supported outside the causal past of the
coupling zones.  Its Born expansion in the coupling strength is generated by
the same discrete building blocks, so on the lattice the series is an exact
finite sum.

Sign convention for the causal propagator: see :data:`CAUSAL_PROPAGATOR_SIGN`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CAUSAL_PROPAGATOR_SIGN",
    "StabilityError",
    "GeometryError",
    "CausalGeometryError",
    "DegenerateModeError",
    "LatticeSpec",
    "FieldOperatorSpec",
    "TestFunction",
    "TripleFunction",
    "make_bump",
    "green_apply",
    "green_residual",
    "pairing",
    "causal_pairing",
    "normalize_mode",
    "CoupledSystem",
    "coupled_advanced_apply",
    "coupled_retarded_apply",
    "theta_apply",
    "born_theta_terms",
    "born_reconstruct",
    "box_mask",
    "causal_past_mask",
    "causal_future_mask",
    "is_spacelike",
]

#: Orientation of the causal propagator E used by :func:`causal_pairing`:
#: ``E = CAUSAL_PROPAGATOR_SIGN * (retarded - advanced)``.  The value -1
#: (advanced minus retarded) makes the lattice commutator pairing agree with
#: the mode-sum imaginary part built from ``exp(+i omega t)`` mode phases
#: (states module).  Flipping it reverses the orientation of every mode
#: normalization but no physical prediction; it is isolated here so the
#: convention lives in exactly one place.
CAUSAL_PROPAGATOR_SIGN = -1.0

#: Width, in cells, of the halo added around discrete light cones.  Leapfrog
#: fronts are not infinitely sharp; all causal-support statements hold
#: outside the cone widened by this many cells.
CONE_HALO_CELLS = 2


class StabilityError(ValueError):
    """The Courant condition dt/dx <= 1 is violated."""


class GeometryError(ValueError):
    """A support box does not fit the lattice as required."""


class CausalGeometryError(GeometryError):
    """A causal-structure precondition is violated."""


class DegenerateModeError(ValueError):
    """A candidate mode pair has (numerically) vanishing commutator."""


_CFL_MARGIN = 1e-12


@dataclass(frozen=True)
class LatticeSpec:
    """Uniform periodic 1+1D lattice.

    Attributes
    ----------
    n_space : int
        Number of spatial sites (periodic), at least 8.
    n_time : int
        Number of time slices.
    dx, dt : float
        Spatial and temporal steps; dt/dx must not exceed 1 - 1e-12.
    """

    n_space: int
    n_time: int
    dx: float
    dt: float

    def __post_init__(self):
        if int(self.n_space) != self.n_space or self.n_space < 8:
            raise GeometryError(f"n_space must be an integer >= 8, got {self.n_space}")
        if int(self.n_time) != self.n_time or self.n_time < 1:
            raise GeometryError(f"n_time must be a positive integer, got {self.n_time}")
        if not (self.dx > 0 and np.isfinite(self.dx)):
            raise GeometryError(f"dx must be positive, got {self.dx}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise GeometryError(f"dt must be positive, got {self.dt}")
        if self.dt / self.dx > 1.0 - _CFL_MARGIN:
            raise StabilityError(
                f"Courant condition violated: dt/dx = {self.dt / self.dx:.12g} "
                f"exceeds {1.0 - _CFL_MARGIN}"
            )

    @property
    def times(self):
        return np.arange(self.n_time) * self.dt

    @property
    def xs(self):
        return np.arange(self.n_space) * self.dx

    @property
    def circumference(self):
        return self.n_space * self.dx

    @property
    def total_time(self):
        return self.n_time * self.dt

    @property
    def shape(self):
        return (self.n_time, self.n_space)


@dataclass(eq=False)
class FieldOperatorSpec:
    """Klein--Gordon operator data: mass and optional static potential.

    ``potential`` is either None (free field) or an array of length
    ``n_space`` giving a static, site-dependent addition to mass^2.
    """

    mass: float
    potential: np.ndarray | None = None

    def __post_init__(self):
        if not (np.isfinite(self.mass) and self.mass >= 0.0):
            raise ValueError(f"mass must be finite and >= 0, got {self.mass}")
        if self.potential is not None:
            self.potential = np.asarray(self.potential, dtype=float)
            if self.potential.ndim != 1 or not np.all(np.isfinite(self.potential)):
                raise ValueError("potential must be a finite 1D array")

    def squared_mass_profile(self, lattice):
        """mass^2 + potential as an array over the spatial sites."""
        prof = np.full(lattice.n_space, float(self.mass) ** 2)
        if self.potential is not None:
            if self.potential.shape != (lattice.n_space,):
                raise ValueError(
                    f"potential has {self.potential.shape[0]} sites, "
                    f"lattice has {lattice.n_space}"
                )
            prof = prof + self.potential
        return prof


def _empty_box():
    return (2, 2, 0, 0)


def _validate_support(lattice, values, box, what):
    t0, t1, x0, x1 = (int(v) for v in box)
    nt, nx = lattice.shape
    if not (0 <= t0 <= t1 <= nt and 0 <= x0 <= x1 <= nx):
        raise GeometryError(f"{what}: malformed support box {box}")
    mask = np.zeros(lattice.shape, dtype=bool)
    mask[t0:t1, x0:x1] = True
    outside = np.abs(values) > 0
    outside[t0:t1, x0:x1] = False
    if np.any(outside):
        raise GeometryError(f"{what}: values are nonzero outside the support box")
    if np.any(np.abs(values) > 0):
        rows = np.nonzero(np.any(values != 0, axis=1))[0]
        if rows[0] < 2 or rows[-1] > nt - 3:
            raise GeometryError(
                f"{what}: support touches the first or last two time slices "
                f"(rows {rows[0]}..{rows[-1]} of {nt})"
            )
    return (t0, t1, x0, x1)


@dataclass(eq=False)
class TestFunction:
    """Smooth compactly supported source on the lattice.

    Attributes
    ----------
    lattice : LatticeSpec
    values : (n_time, n_space) array
    support_box : (t0, t1, x0, x1)
        Half-open index rectangle outside which values vanish identically.
        Supports must stay clear of the first and last two time slices.
    """

    lattice: LatticeSpec
    values: np.ndarray
    support_box: tuple

    __test__ = False  # keep pytest from collecting this as a test class

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.lattice.shape:
            raise GeometryError(
                f"values shape {self.values.shape} does not match lattice "
                f"{self.lattice.shape}"
            )
        self.support_box = _validate_support(
            self.lattice, self.values, self.support_box, "test function"
        )

    @classmethod
    def from_values(cls, lattice, values):
        """Wrap an array, inferring the exact bounding support box."""
        values = np.asarray(values, dtype=float)
        nz = np.nonzero(values)
        if len(nz[0]) == 0:
            return cls(lattice, values, _empty_box())
        box = (nz[0].min(), nz[0].max() + 1, nz[1].min(), nz[1].max() + 1)
        return cls(lattice, values, box)

    def scaled(self, factor):
        """Same support, values multiplied by ``factor``."""
        return TestFunction(self.lattice, self.values * factor, self.support_box)

    @property
    def is_zero(self):
        return not np.any(self.values)


@dataclass(eq=False)
class TripleFunction:
    """Source/field triple over (system, probe A, probe B) components."""

    lattice: LatticeSpec
    system: np.ndarray
    probe_a: np.ndarray
    probe_b: np.ndarray

    def __post_init__(self):
        for name in ("system", "probe_a", "probe_b"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != self.lattice.shape:
                raise GeometryError(
                    f"{name} shape {arr.shape} does not match lattice "
                    f"{self.lattice.shape}"
                )
            setattr(self, name, arr)

    @classmethod
    def zeros(cls, lattice):
        z = np.zeros(lattice.shape)
        return cls(lattice, z.copy(), z.copy(), z.copy())

    @classmethod
    def single_slot(cls, f, slot):
        """Embed a TestFunction into one slot ('system', 'probe_a', 'probe_b')."""
        z = np.zeros(f.lattice.shape)
        parts = {"system": z.copy(), "probe_a": z.copy(), "probe_b": z.copy()}
        parts[slot] = f.values.copy()
        return cls(f.lattice, parts["system"], parts["probe_a"], parts["probe_b"])

    @property
    def components(self):
        return (self.system, self.probe_a, self.probe_b)

    def copy(self):
        return TripleFunction(
            self.lattice, self.system.copy(), self.probe_a.copy(), self.probe_b.copy()
        )


# --------------------------------------------------------------- sources ---

def make_bump(lattice, center, radii, amplitude):
    """Smooth product bump exp(-1/(1-u_t^2)) * exp(-1/(1-u_x^2)).

    Parameters
    ----------
    lattice : LatticeSpec
    center : (t_c, x_c)
        Physical coordinates of the bump centre.
    radii : (r_t, r_x)
        Support half-widths; the support is the open box |t - t_c| < r_t,
        |x - x_c| < r_x.
    amplitude : float
        Peak prefactor; the centre value is amplitude * exp(-2).  Zero gives
        the identically vanishing function.

    The temporal box must keep clear of the first and last two time slices,
    and the spatial box must fit on the circle without crossing the
    coordinate seam at x = 0 (so the support is a plain index rectangle).

    Raises
    ------
    GeometryError
        If the support box does not fit as required.
    """
    t_c, x_c = (float(v) for v in center)
    r_t, r_x = (float(v) for v in radii)
    if r_t <= 0 or r_x <= 0:
        raise GeometryError(f"bump radii must be positive, got {radii}")
    if amplitude == 0.0:
        return TestFunction(lattice, np.zeros(lattice.shape), _empty_box())
    if t_c - r_t < lattice.dt or t_c + r_t > (lattice.n_time - 2) * lattice.dt:
        raise GeometryError(
            f"temporal support ({t_c - r_t:.6g}, {t_c + r_t:.6g}) leaves the "
            f"interior window [{lattice.dt:.6g}, "
            f"{(lattice.n_time - 2) * lattice.dt:.6g}]"
        )
    if 2.0 * r_x >= lattice.circumference:
        raise GeometryError("spatial support wraps the whole circle")
    if x_c - r_x < 0.0 or x_c + r_x > lattice.circumference:
        raise GeometryError(
            f"spatial support ({x_c - r_x:.6g}, {x_c + r_x:.6g}) crosses the "
            f"circle seam; place the bump within [0, {lattice.circumference:.6g}]"
        )
    u_t = (lattice.times - t_c) / r_t
    u_x = (lattice.xs - x_c) / r_x
    with np.errstate(divide="ignore", over="ignore"):
        prof_t = np.where(np.abs(u_t) < 1.0, np.exp(-1.0 / np.maximum(1.0 - u_t**2, 1e-300)), 0.0)
        prof_x = np.where(np.abs(u_x) < 1.0, np.exp(-1.0 / np.maximum(1.0 - u_x**2, 1e-300)), 0.0)
    values = amplitude * np.outer(prof_t, prof_x)
    return TestFunction.from_values(lattice, values)


# --------------------------------------------------------- Green operators ---

def _laplacian(rows, dx):
    return (np.roll(rows, -1, axis=-1) - 2.0 * rows + np.roll(rows, 1, axis=-1)) / dx**2


def _check_cfl(lattice):
    if lattice.dt / lattice.dx > 1.0 - _CFL_MARGIN:
        raise StabilityError(
            f"Courant condition violated: dt/dx = {lattice.dt / lattice.dx:.12g}"
        )


def _leapfrog(lattice, v_profile, source, direction):
    """Explicit leapfrog solve of (d_tt - Lap + V) u = source, zero data.

    ``direction`` 'retarded' marches forward from zero initial data,
    'advanced' backward from zero final data.  Sources are expected to
    vanish on the first two (retarded) / last two (advanced) slices.
    """
    nt, _ = lattice.shape
    dt2, dx = lattice.dt**2, lattice.dx
    u = np.zeros(lattice.shape)
    if direction == "retarded":
        for n in range(1, nt - 1):
            acc = _laplacian(u[n], dx) - v_profile * u[n] + source[n]
            u[n + 1] = 2.0 * u[n] - u[n - 1] + dt2 * acc
    elif direction == "advanced":
        for n in range(nt - 2, 0, -1):
            acc = _laplacian(u[n], dx) - v_profile * u[n] + source[n]
            u[n - 1] = 2.0 * u[n] - u[n + 1] + dt2 * acc
    else:
        raise ValueError(f"direction must be 'retarded' or 'advanced', got {direction!r}")
    return u


def green_apply(op, direction, f):
    """Apply the retarded or advanced Green operator of ``op`` to ``f``.

    Parameters
    ----------
    op : FieldOperatorSpec
    direction : str
        'retarded' (zero data before the source) or 'advanced' (after).
    f : TestFunction

    Returns
    -------
    (n_time, n_space) array
        The causal solution field.

    Raises
    ------
    StabilityError
        If the lattice violates the Courant condition.
    """
    lattice = f.lattice
    _check_cfl(lattice)
    v_profile = op.squared_mass_profile(lattice)
    return _leapfrog(lattice, v_profile, f.values, direction)


def green_residual(op, f, solution):
    """Max-norm operator residual of a Green solve, independent discretization.

    Applies a fourth-order accurate stencil for ``d_tt - Lap + V`` to the
    computed solution and compares with the source on interior slices; for
    the second-order leapfrog solution this measures the genuine
    O(dx^2 + dt^2) solve error rather than echoing the solver's own stencil.
    """
    lattice = f.lattice
    v_profile = op.squared_mass_profile(lattice)
    u = solution
    dt2, dx2 = lattice.dt**2, lattice.dx**2
    d_tt = (
        -u[4:] + 16.0 * u[3:-1] - 30.0 * u[2:-2] + 16.0 * u[1:-3] - u[:-4]
    ) / (12.0 * dt2)
    mid = u[2:-2]
    d_xx = (
        -np.roll(mid, -2, axis=1)
        + 16.0 * np.roll(mid, -1, axis=1)
        - 30.0 * mid
        + 16.0 * np.roll(mid, 1, axis=1)
        - np.roll(mid, 2, axis=1)
    ) / (12.0 * dx2)
    residual = d_tt - d_xx + v_profile * mid - f.values[2:-2]
    return float(np.max(np.abs(residual)))


# ----------------------------------------------------------------- pairing ---

def _values_of(f):
    return f.values if isinstance(f, TestFunction) else np.asarray(f, dtype=float)


def pairing(f, g, lattice=None):
    """Spacetime L^2 pairing sum(f * g) * dx * dt.

    Either argument may be a TestFunction or a plain field array; when both
    are arrays the lattice must be passed explicitly.
    """
    fv, gv = _values_of(f), _values_of(g)
    if lattice is None:
        lattice = getattr(f, "lattice", None) or getattr(g, "lattice", None)
        if lattice is None:
            raise ValueError("pairing of two plain arrays needs an explicit lattice")
    return float(np.sum(fv * gv)) * lattice.dx * lattice.dt


def causal_pairing(op, f, g):
    """Commutator pairing E(f, g) through the causal propagator.

    Computes ``CAUSAL_PROPAGATOR_SIGN * [pairing(f, retarded g) -
    pairing(f, advanced g)]``; antisymmetric under exchange of f and g up to
    the solver error, and zero for spacelike-separated supports.
    """
    ret = green_apply(op, "retarded", g)
    adv = green_apply(op, "advanced", g)
    return CAUSAL_PROPAGATOR_SIGN * (pairing(f, ret) - pairing(f, adv))


def normalize_mode(op, f1, f2, tol=1e-8):
    """Rescale ``f2`` so the mode pair has unit commutator.

    Returns ``(f1, f2 / E(f1, f2))``.  Raises :class:`DegenerateModeError`
    when |E(f1, f2)| <= tol: the pair does not span a symplectic plane at
    this resolution.
    """
    e = causal_pairing(op, f1, f2)
    if abs(e) <= tol:
        raise DegenerateModeError(
            f"|E(f1, f2)| = {abs(e):.3e} <= {tol}; mode pair is degenerate"
        )
    return f1, f2.scaled(1.0 / e)


# --------------------------------------------------------- causal geometry ---

def box_mask(lattice, box):
    """Boolean lattice mask of an index box (t0, t1, x0, x1)."""
    t0, t1, x0, x1 = box
    mask = np.zeros(lattice.shape, dtype=bool)
    mask[t0:t1, x0:x1] = True
    return mask


def _spatial_index_distance(lattice, box):
    """Circular index distance from each site to the box columns [x0, x1)."""
    x0, x1 = box[2], box[3]
    n = lattice.n_space
    idx = np.arange(n)
    d_right = (idx - (x1 - 1)) % n
    d_left = (x0 - idx) % n
    dist = np.minimum(d_right, d_left).astype(float)
    inside = (idx >= x0) & (idx < x1)
    dist[inside] = 0.0
    return dist


def _cone_mask(lattice, box, direction, halo):
    t0, t1 = box[0], box[1]
    mask = np.zeros(lattice.shape, dtype=bool)
    if t0 >= t1 or box[2] >= box[3]:
        return mask
    dist = _spatial_index_distance(lattice, box)
    # Discrete signals travel at most one cell per step (the stencil's
    # domain of dependence); outside that cone the leapfrog field is
    # exactly zero.  At Courant number < 1 this grid cone is wider than
    # the physical cone, so every statement made with it is conservative.
    rows = np.arange(lattice.n_time)
    if direction == "past":
        steps = (t1 - 1) - rows
    else:
        steps = rows - t0
    radius = steps + halo
    mask = dist[None, :] <= radius[:, None]
    if direction == "past":
        mask[rows > t1 - 1] = False
    else:
        mask[rows < t0] = False
    return mask


def causal_past_mask(lattice, boxes, halo=CONE_HALO_CELLS):
    """Discrete causal past J^-(union of boxes), widened by ``halo`` cells."""
    mask = np.zeros(lattice.shape, dtype=bool)
    for box in boxes:
        mask |= _cone_mask(lattice, box, "past", halo)
    return mask


def causal_future_mask(lattice, boxes, halo=CONE_HALO_CELLS):
    """Discrete causal future J^+(union of boxes), widened by ``halo`` cells."""
    mask = np.zeros(lattice.shape, dtype=bool)
    for box in boxes:
        mask |= _cone_mask(lattice, box, "future", halo)
    return mask


def is_spacelike(lattice, box_a, box_b, halo=CONE_HALO_CELLS):
    """True when two index boxes are causally disconnected (with halo)."""
    cone = causal_past_mask(lattice, [box_a], halo) | causal_future_mask(
        lattice, [box_a], halo
    )
    return not np.any(cone & box_mask(lattice, box_b))


# ------------------------------------------------------------ coupled system ---

@dataclass(eq=False)
class CoupledSystem:
    """System + two probes coupled through local functions rho_a, rho_b.

    The coupled operator is block ``[[P, l*rho_a, l*rho_b], [l*rho_a, Q_A, 0],
    [l*rho_b, 0, Q_B]]`` acting on (system, probe A, probe B) triples, with
    ``l = coupling`` and the rho's acting by pointwise multiplication.
    """

    lattice: LatticeSpec
    system_op: FieldOperatorSpec
    probe_a_op: FieldOperatorSpec
    probe_b_op: FieldOperatorSpec
    rho_a: TestFunction
    rho_b: TestFunction
    coupling: float = field(default=0.0)

    def __post_init__(self):
        for rho, name in ((self.rho_a, "rho_a"), (self.rho_b, "rho_b")):
            if rho.lattice is not self.lattice and rho.lattice != self.lattice:
                raise GeometryError(f"{name} lives on a different lattice")
        if np.any(self.rho_a.values * self.rho_b.values != 0.0):
            warnings.warn(
                "coupling zones rho_a and rho_b overlap; the probes are not "
                "independently localized",
                stacklevel=2,
            )

    @property
    def coupling_boxes(self):
        return (self.rho_a.support_box, self.rho_b.support_box)

    def interaction_past(self, halo=CONE_HALO_CELLS):
        """J^-(supp rho_a union supp rho_b): where theta may act nontrivially."""
        return causal_past_mask(self.lattice, self.coupling_boxes, halo)


def _coupled_green(coupled, g, direction):
    lattice = coupled.lattice
    _check_cfl(lattice)
    nt = lattice.n_time
    dt2, dx = lattice.dt**2, lattice.dx
    v_s = coupled.system_op.squared_mass_profile(lattice)
    v_a = coupled.probe_a_op.squared_mass_profile(lattice)
    v_b = coupled.probe_b_op.squared_mass_profile(lattice)
    ra, rb = coupled.rho_a.values, coupled.rho_b.values
    lam = coupled.coupling
    u_s = np.zeros(lattice.shape)
    u_a = np.zeros(lattice.shape)
    u_b = np.zeros(lattice.shape)
    if direction == "advanced":
        steps = range(nt - 2, 0, -1)
        shift = -1
    elif direction == "retarded":
        steps = range(1, nt - 1)
        shift = +1
    else:
        raise ValueError(f"direction must be 'retarded' or 'advanced', got {direction!r}")
    for n in steps:
        acc_s = (
            _laplacian(u_s[n], dx)
            - v_s * u_s[n]
            - lam * (ra[n] * u_a[n] + rb[n] * u_b[n])
            + g.system[n]
        )
        acc_a = _laplacian(u_a[n], dx) - v_a * u_a[n] - lam * ra[n] * u_s[n] + g.probe_a[n]
        acc_b = _laplacian(u_b[n], dx) - v_b * u_b[n] - lam * rb[n] * u_s[n] + g.probe_b[n]
        u_s[n + shift] = 2.0 * u_s[n] - u_s[n - shift] + dt2 * acc_s
        u_a[n + shift] = 2.0 * u_a[n] - u_a[n - shift] + dt2 * acc_a
        u_b[n + shift] = 2.0 * u_b[n] - u_b[n - shift] + dt2 * acc_b
    return TripleFunction(lattice, u_s, u_a, u_b)


def coupled_advanced_apply(coupled, g):
    """Advanced Green operator of the coupled (system + probes) operator.

    Backward leapfrog from zero final data; the coupling terms are evaluated
    at the same time level as the free stencil, so the coupled operator is,
    as a matrix, exactly the free operator plus the pointwise coupling block.
    """
    return _coupled_green(coupled, g, "advanced")


def coupled_retarded_apply(coupled, g):
    """Retarded Green operator of the coupled operator (adjoint partner)."""
    return _coupled_green(coupled, g, "retarded")


# ------------------------------------------------------------- theta map ---

def _support_mask_triple(g):
    return (g.system != 0.0) | (g.probe_a != 0.0) | (g.probe_b != 0.0)


def theta_apply(coupled, g):
    """Scattering map theta(g) = g - C E_T^-(g) of the coupled dynamics.

    Parameters
    ----------
    coupled : CoupledSystem
    g : TripleFunction
        Input source triple; its support must avoid the causal past of the
        coupling zones (it must be possible to prepare g before any
        interaction has happened).

    Returns
    -------
    TripleFunction

    Raises
    ------
    CausalGeometryError
        If ``g`` has support inside J^-(supp rho_a union supp rho_b).
    """
    support = _support_mask_triple(g)
    if np.any(support & coupled.interaction_past()):
        raise CausalGeometryError(
            "input support intersects the causal past of the coupling zones; "
            "theta is only defined on sources from the in-region"
        )
    if coupled.coupling == 0.0:
        return g.copy()
    e = coupled_advanced_apply(coupled, g)
    lam = coupled.coupling
    ra, rb = coupled.rho_a.values, coupled.rho_b.values
    return TripleFunction(
        coupled.lattice,
        g.system - lam * (ra * e.probe_a + rb * e.probe_b),
        g.probe_a - lam * ra * e.system,
        g.probe_b - lam * rb * e.system,
    )


def born_theta_terms(coupled, f, which_probe, max_order=4):
    """Born (coupling-strength) expansion terms of ``theta`` on one probe.

    For input ``g`` = ``f`` in the slot of probe ``which_probe`` ('a' or
    'b'), returns the list ``[T_0, ..., T_max_order]`` of TripleFunction
    coefficients with ``theta(g) = sum_k coupling^k T_k`` (+ remainder).
    Probe-slot components appear at even orders, system-slot components at
    odd orders; the terms are built from the same single-field advanced
    solver and pointwise coupling products as the coupled solver, and the
    stored coupling strength of ``coupled`` is not used.

    The recursion is ``T_0 = g`` and ``T_k = -C_1 V_{k-1}`` with
    ``V_0 = E^- g``, ``V_k = -E^- C_1 V_{k-1}``, where ``C_1`` is the
    coupling block at unit strength and ``E^-`` the slotwise free advanced
    Green operator.
    """
    if which_probe not in ("a", "b"):
        raise ValueError(f"which_probe must be 'a' or 'b', got {which_probe!r}")
    lattice = coupled.lattice
    _check_cfl(lattice)
    v_profiles = (
        coupled.system_op.squared_mass_profile(lattice),
        coupled.probe_a_op.squared_mass_profile(lattice),
        coupled.probe_b_op.squared_mass_profile(lattice),
    )
    ra, rb = coupled.rho_a.values, coupled.rho_b.values

    def advanced_slotwise(triple):
        return tuple(
            _leapfrog(lattice, v, comp, "advanced") if np.any(comp) else np.zeros(lattice.shape)
            for v, comp in zip(v_profiles, triple)
        )

    def coupling_block(triple):
        u_s, u_a, u_b = triple
        return (ra * u_a + rb * u_b, ra * u_s, rb * u_s)

    g = TripleFunction.single_slot(f, "probe_a" if which_probe == "a" else "probe_b")
    terms = [g.copy()]
    v = advanced_slotwise(g.components)
    for _ in range(max_order):
        term = tuple(-comp for comp in coupling_block(v))
        terms.append(TripleFunction(lattice, *term))
        v = tuple(-comp for comp in advanced_slotwise(coupling_block(v)))
    return terms


def born_reconstruct(terms, coupling):
    """Evaluate a Born term list at a coupling strength: sum_k coupling^k T_k."""
    lattice = terms[0].lattice
    out = TripleFunction.zeros(lattice)
    for k, term in enumerate(terms):
        w = coupling**k
        out.system += w * term.system
        out.probe_a += w * term.probe_a
        out.probe_b += w * term.probe_b
    return out
