"""Scenario files: INI parsing, serialization, and deterministic CSV output.

A scenario file is a flat key-value INI document with eight sections.  All
quantities are in lattice units (c = hbar = 1, masses and temperatures in
1/length).  Keys marked (required) have no default.

``[lattice]``
    ``n_space`` int (required), ``n_time`` int (required), ``dx`` float
    (required), ``dt`` float (default ``0.98 * dx``).
``[system]``
    ``mass`` float (required).
``[probe_a]`` / ``[probe_b]``
    ``mass`` float (required); coupling-zone bump geometry ``zone_t``,
    ``zone_x`` (center, required), ``zone_radius_t``, ``zone_radius_x``
    (required), ``zone_amplitude`` (default 1.0).
``[states]``
    ``system``, ``probe_a``, ``probe_b``: ``vacuum`` or ``thermal``
    (default vacuum); ``<slot>_temperature`` float, required for and only
    allowed with ``thermal``.
``[modes]``
    Smooth harmonic-box mode pairs, one pair per probe, supported on a
    rectangle above each coupling zone: ``box_t0``, ``box_t1`` (required),
    ``box_halfwidth`` (required), ``harmonics_t`` int (default 4),
    ``harmonics_x`` int (default 5), and four comma-separated coefficient
    lists ``a1``, ``a2``, ``b1``, ``b2`` (required) of length
    ``harmonics_t * (2 * harmonics_x + 1)``.
``[couplings]``
    Either ``values`` (comma-separated ascending nonnegative floats) or a
    generated grid: ``start`` (default 0.0), ``stop`` (required), ``count``
    int (default 33), ``spacing`` ``linear`` or ``geometric`` (default
    linear; geometric requires ``start > 0``).
``[sweep]``
    ``uncertainty_tol`` float (default 1e-8), ``critical_tol`` float
    (default 1e-4).

`parse_scenario` re-runs every geometric and physical validation of
`make_scenario`; error messages name the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

import numpy as np

from .lattice import FieldOperatorSpec, LatticeSpec, TestFunction, make_bump
from .protocol import make_scenario
from .states import build_state

__all__ = [
    "ScenarioFormatError",
    "ScenarioDocument",
    "harmonic_coefficient_count",
    "harmonic_box_function",
    "parse_document",
    "build_scenario",
    "parse_scenario",
    "serialize_document",
    "write_document",
    "SWEEP_CSV_HEADER",
    "sweep_csv_text",
    "write_sweep_csv",
]

SWEEP_CSV_HEADER = "lambda,p_s,nu_minus,negativity,det_a,det_b,det_c,trace_term"

_SECTIONS = (
    "lattice",
    "system",
    "probe_a",
    "probe_b",
    "states",
    "modes",
    "couplings",
    "sweep",
)


class ScenarioFormatError(ValueError):
    """A scenario file is missing a key or carries an invalid value."""


# ------------------------------------------------------------ mode family ---

def harmonic_coefficient_count(harmonics_t, harmonics_x):
    """Number of coefficients of a harmonic-box function."""
    return harmonics_t * (2 * harmonics_x + 1)


def _box_rows_cols(lattice, t0, t1, x_center, halfwidth):
    rows = np.arange(int(np.ceil(t0 / lattice.dt)), int(t1 / lattice.dt) + 1)
    half = int(halfwidth / lattice.dx)
    center = int(round(x_center / lattice.dx))
    cols = np.arange(center - half, center + half + 1)
    return rows, cols


def _harmonic_basis(rows, cols, harmonics_t, harmonics_x):
    """Basis functions sin(p pi tau) x {1, sin(q pi xi), cos(q pi xi)}."""
    rows = rows.astype(float)
    cols = cols.astype(float)
    tau = (rows - rows[0] + 0.5) / (rows[-1] - rows[0] + 1.0)
    xi = (cols - cols[0] + 0.5) / (cols[-1] - cols[0] + 1.0)
    members = []
    for p in range(1, harmonics_t + 1):
        f_t = np.sin(np.pi * p * tau)
        for q in range(0, harmonics_x + 1):
            if q == 0:
                members.append(np.outer(f_t, np.ones_like(xi)))
            else:
                members.append(np.outer(f_t, np.sin(np.pi * q * xi)))
                members.append(np.outer(f_t, np.cos(np.pi * q * xi)))
    return members


def harmonic_box_function(
    lattice, t_bounds, x_center, halfwidth, coefficients,
    harmonics_t=4, harmonics_x=5,
):
    """Smooth test function from harmonic coefficients over a box.

    The box spans times ``t_bounds = (t0, t1)`` and the spatial window
    ``x_center +- halfwidth``; the function is a linear combination of
    separable harmonics that vanish on the box boundary in time, so the
    result is a compactly supported lattice test function.

    Parameters
    ----------
    lattice : LatticeSpec
    t_bounds : pair of floats
        Time extent of the box, in lattice units.
    x_center, halfwidth : float
        Spatial window center and half-width.
    coefficients : sequence of float
        One weight per basis member, length
        ``harmonic_coefficient_count(harmonics_t, harmonics_x)``.
    harmonics_t, harmonics_x : int
        Number of temporal harmonics and of spatial harmonic pairs.

    Returns
    -------
    TestFunction
    """
    t0, t1 = (float(v) for v in t_bounds)
    coeffs = np.asarray(coefficients, dtype=float).reshape(-1)
    expected = harmonic_coefficient_count(harmonics_t, harmonics_x)
    if coeffs.size != expected:
        raise ValueError(
            f"expected {expected} coefficients for harmonics_t={harmonics_t}, "
            f"harmonics_x={harmonics_x}, got {coeffs.size}"
        )
    if not (0.0 < t0 < t1):
        raise ValueError(f"box times must satisfy 0 < t0 < t1, got ({t0}, {t1})")
    rows, cols = _box_rows_cols(lattice, t0, t1, x_center, halfwidth)
    if rows.size < 2:
        raise ValueError("box is too thin: fewer than two time rows")
    if rows[-1] >= lattice.n_time - 1:
        raise ValueError("box leaves the interior time window of the lattice")
    members = _harmonic_basis(rows, cols, harmonics_t, harmonics_x)
    patch = np.zeros((rows.size, cols.size))
    for weight, member in zip(coeffs, members):
        if weight != 0.0:
            patch += weight * member
    values = np.zeros(lattice.shape)
    values[np.ix_(rows, cols % lattice.n_space)] = patch
    return TestFunction.from_values(lattice, values)


# -------------------------------------------------------------- documents ---

@dataclass
class ScenarioDocument:
    """Typed contents of a scenario file, defaults applied.

    `build_scenario` turns a document into a validated `HarvestScenario`;
    `serialize_document` writes it back out.  Parsing a serialized document
    reproduces it field-by-field.
    """

    n_space: int
    n_time: int
    dx: float
    dt: float
    system_mass: float
    probe_a_mass: float
    probe_b_mass: float
    zone_a_center: tuple
    zone_a_radii: tuple
    zone_a_amplitude: float
    zone_b_center: tuple
    zone_b_radii: tuple
    zone_b_amplitude: float
    system_state: str
    probe_a_state: str
    probe_b_state: str
    system_temperature: float | None
    probe_a_temperature: float | None
    probe_b_temperature: float | None
    box_t0: float
    box_t1: float
    box_halfwidth: float
    harmonics_t: int
    harmonics_x: int
    mode_a1: np.ndarray
    mode_a2: np.ndarray
    mode_b1: np.ndarray
    mode_b2: np.ndarray
    lambda_grid: np.ndarray
    uncertainty_tol: float = 1e-8
    critical_tol: float = 1e-4
    couplings_raw: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ScenarioDocument):
            return NotImplemented
        for f in fields(self):
            if f.name == "couplings_raw":
                continue
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if not np.array_equal(a, np.asarray(b)):
                    return False
            elif a != b:
                return False
        return True


class _SectionReader:
    """Typed key access over one section with key-naming errors."""

    def __init__(self, parser, section):
        self.section = section
        self.present = parser.has_section(section)
        self._items = dict(parser.items(section)) if self.present else {}

    def _raw(self, key, default):
        if key not in self._items:
            if default is _REQUIRED:
                raise ScenarioFormatError(
                    f"{self.section}.{key}: missing required key"
                )
            return default
        return self._items.pop(key)

    def _typed(self, key, cast, kind, default):
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return cast(raw)
        except ValueError:
            raise ScenarioFormatError(
                f"{self.section}.{key}: expected {kind}, got {raw!r}"
            ) from None

    def float(self, key, default=None):
        return self._typed(key, float, "a number", default)

    def int(self, key, default=None):
        return self._typed(key, int, "an integer", default)

    def word(self, key, choices, default=None):
        raw = self._raw(key, default)
        if raw not in choices:
            raise ScenarioFormatError(
                f"{self.section}.{key}: expected one of {sorted(choices)}, "
                f"got {raw!r}"
            )
        return raw

    def float_list(self, key, default=None):
        raw = self._raw(key, default)
        if not isinstance(raw, str):
            return raw
        try:
            return np.array(
                [float(part) for part in raw.replace("\n", " ").split(",")]
            )
        except ValueError:
            raise ScenarioFormatError(
                f"{self.section}.{key}: expected comma-separated numbers"
            ) from None

    def has(self, key):
        return key in self._items

    def reject_unknown(self):
        if self._items:
            key = sorted(self._items)[0]
            raise ScenarioFormatError(f"{self.section}.{key}: unknown key")


class _Required:
    def __repr__(self):
        return "<required>"


_REQUIRED = _Required()


def _state_fields(reader, slot):
    kind = reader.word(slot, {"vacuum", "thermal"}, default="vacuum")
    temp_key = f"{slot}_temperature"
    if kind == "thermal":
        temperature = reader.float(temp_key, default=_REQUIRED)
    else:
        if reader.has(temp_key):
            raise ScenarioFormatError(
                f"states.{temp_key}: only allowed with {slot} = thermal"
            )
        temperature = None
    return kind, temperature


def _coupling_grid(reader):
    raw = {}
    if reader.has("values"):
        values = reader.float_list("values", default=_REQUIRED)
        raw["values"] = values
        arr = np.asarray(values, dtype=float)
        if arr.size == 0 or np.any(arr < 0) or np.any(np.diff(arr) <= 0):
            raise ScenarioFormatError(
                "couplings.values: must be nonnegative and strictly ascending"
            )
        return values, raw
    start = reader.float("start", default=0.0)
    stop = reader.float("stop", default=_REQUIRED)
    count = reader.int("count", default=33)
    spacing = reader.word("spacing", {"linear", "geometric"}, default="linear")
    raw.update(start=start, stop=stop, count=count, spacing=spacing)
    if count < 2:
        raise ScenarioFormatError("couplings.count: must be at least 2")
    if start < 0 or stop <= start:
        raise ScenarioFormatError(
            "couplings.stop: grid endpoints must satisfy 0 <= start < stop"
        )
    if spacing == "geometric":
        if start <= 0:
            raise ScenarioFormatError(
                "couplings.start: geometric spacing requires start > 0"
            )
        grid = np.geomspace(start, stop, count)
    else:
        grid = np.linspace(start, stop, count)
    return grid, raw


def parse_document(path):
    """Read a scenario file into a `ScenarioDocument` (defaults applied)."""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None
    )
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ScenarioFormatError(f"cannot read scenario file: {exc}") from exc
    except configparser.Error as exc:
        raise ScenarioFormatError(f"malformed scenario file: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ScenarioFormatError(f"{section}: unknown section")

    lattice = _SectionReader(parser, "lattice")
    n_space = lattice.int("n_space", default=_REQUIRED)
    n_time = lattice.int("n_time", default=_REQUIRED)
    dx = lattice.float("dx", default=_REQUIRED)
    dt = lattice.float("dt", default=0.98 * dx)

    system = _SectionReader(parser, "system")
    system_mass = system.float("mass", default=_REQUIRED)

    zones = {}
    for name in ("probe_a", "probe_b"):
        probe = _SectionReader(parser, name)
        zones[name] = dict(
            mass=probe.float("mass", default=_REQUIRED),
            center=(
                probe.float("zone_t", default=_REQUIRED),
                probe.float("zone_x", default=_REQUIRED),
            ),
            radii=(
                probe.float("zone_radius_t", default=_REQUIRED),
                probe.float("zone_radius_x", default=_REQUIRED),
            ),
            amplitude=probe.float("zone_amplitude", default=1.0),
        )
        probe.reject_unknown()

    states = _SectionReader(parser, "states")
    system_kind, system_temp = _state_fields(states, "system")
    probe_a_kind, probe_a_temp = _state_fields(states, "probe_a")
    probe_b_kind, probe_b_temp = _state_fields(states, "probe_b")
    states.reject_unknown()

    modes = _SectionReader(parser, "modes")
    box_t0 = modes.float("box_t0", default=_REQUIRED)
    box_t1 = modes.float("box_t1", default=_REQUIRED)
    box_halfwidth = modes.float("box_halfwidth", default=_REQUIRED)
    harmonics_t = modes.int("harmonics_t", default=4)
    harmonics_x = modes.int("harmonics_x", default=5)
    expected = harmonic_coefficient_count(harmonics_t, harmonics_x)
    coeff_lists = {}
    for key in ("a1", "a2", "b1", "b2"):
        coeffs = modes.float_list(key, default=_REQUIRED)
        if coeffs.size != expected:
            raise ScenarioFormatError(
                f"modes.{key}: expected {expected} coefficients "
                f"(harmonics_t * (2 * harmonics_x + 1)), got {coeffs.size}"
            )
        coeff_lists[key] = coeffs
    modes.reject_unknown()

    couplings = _SectionReader(parser, "couplings")
    if not couplings.present:
        raise ScenarioFormatError("couplings.stop: missing required key")
    grid, couplings_raw = _coupling_grid(couplings)
    couplings.reject_unknown()

    sweep_section = _SectionReader(parser, "sweep")
    uncertainty_tol = sweep_section.float("uncertainty_tol", default=1e-8)
    critical_tol = sweep_section.float("critical_tol", default=1e-4)
    sweep_section.reject_unknown()
    lattice.reject_unknown()
    system.reject_unknown()

    return ScenarioDocument(
        n_space=n_space,
        n_time=n_time,
        dx=dx,
        dt=dt,
        system_mass=system_mass,
        probe_a_mass=zones["probe_a"]["mass"],
        probe_b_mass=zones["probe_b"]["mass"],
        zone_a_center=zones["probe_a"]["center"],
        zone_a_radii=zones["probe_a"]["radii"],
        zone_a_amplitude=zones["probe_a"]["amplitude"],
        zone_b_center=zones["probe_b"]["center"],
        zone_b_radii=zones["probe_b"]["radii"],
        zone_b_amplitude=zones["probe_b"]["amplitude"],
        system_state=system_kind,
        probe_a_state=probe_a_kind,
        probe_b_state=probe_b_kind,
        system_temperature=system_temp,
        probe_a_temperature=probe_a_temp,
        probe_b_temperature=probe_b_temp,
        box_t0=box_t0,
        box_t1=box_t1,
        box_halfwidth=box_halfwidth,
        harmonics_t=harmonics_t,
        harmonics_x=harmonics_x,
        mode_a1=coeff_lists["a1"],
        mode_a2=coeff_lists["a2"],
        mode_b1=coeff_lists["b1"],
        mode_b2=coeff_lists["b2"],
        lambda_grid=grid,
        uncertainty_tol=uncertainty_tol,
        critical_tol=critical_tol,
        couplings_raw=couplings_raw,
    )


def _wrap(section_key, action):
    try:
        return action()
    except ScenarioFormatError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise ScenarioFormatError(f"{section_key}: {exc}") from exc


def build_scenario(doc):
    """Build and fully validate the `HarvestScenario` of a document.

    Every geometric and physical validation of `make_scenario` is re-run;
    failures are re-raised as `ScenarioFormatError` naming the key whose
    value drives the violated constraint (CFL, zone geometry, causal mode
    placement, spectrum positivity).
    """
    lattice = _wrap(
        "lattice.dt",
        lambda: LatticeSpec(
            n_space=doc.n_space, n_time=doc.n_time, dx=doc.dx, dt=doc.dt
        ),
    )
    system_op = _wrap(
        "system.mass", lambda: FieldOperatorSpec(mass=doc.system_mass)
    )
    probe_a_op = _wrap(
        "probe_a.mass", lambda: FieldOperatorSpec(mass=doc.probe_a_mass)
    )
    probe_b_op = _wrap(
        "probe_b.mass", lambda: FieldOperatorSpec(mass=doc.probe_b_mass)
    )
    rho_a = _wrap(
        "probe_a.zone_t",
        lambda: make_bump(
            lattice, doc.zone_a_center, doc.zone_a_radii, doc.zone_a_amplitude
        ),
    )
    rho_b = _wrap(
        "probe_b.zone_t",
        lambda: make_bump(
            lattice, doc.zone_b_center, doc.zone_b_radii, doc.zone_b_amplitude
        ),
    )

    def mode_fn(coeffs, x_center, key):
        return _wrap(
            f"modes.{key}",
            lambda: harmonic_box_function(
                lattice,
                (doc.box_t0, doc.box_t1),
                x_center,
                doc.box_halfwidth,
                coeffs,
                harmonics_t=doc.harmonics_t,
                harmonics_x=doc.harmonics_x,
            ),
        )

    mode_a = (
        mode_fn(doc.mode_a1, doc.zone_a_center[1], "a1"),
        mode_fn(doc.mode_a2, doc.zone_a_center[1], "a2"),
    )
    mode_b = (
        mode_fn(doc.mode_b1, doc.zone_b_center[1], "b1"),
        mode_fn(doc.mode_b2, doc.zone_b_center[1], "b2"),
    )

    def state_for(section_key, kind, op, temperature):
        return _wrap(
            section_key,
            lambda: build_state(kind, op, lattice, temperature=temperature),
        )

    system_state = state_for(
        "states.system", doc.system_state, system_op, doc.system_temperature
    )
    probe_a_state = state_for(
        "states.probe_a", doc.probe_a_state, probe_a_op, doc.probe_a_temperature
    )
    probe_b_state = state_for(
        "states.probe_b", doc.probe_b_state, probe_b_op, doc.probe_b_temperature
    )

    return _wrap(
        "modes.box_t0",
        lambda: make_scenario(
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
            lambda_grid=doc.lambda_grid,
        ),
    )


def parse_scenario(path):
    """Parse and fully validate a scenario file."""
    return build_scenario(parse_document(path))


# ----------------------------------------------------------- serialization ---

def _fmt(value):
    return repr(float(value))


def _fmt_list(values):
    return ", ".join(_fmt(v) for v in np.asarray(values).reshape(-1))


def serialize_document(doc):
    """Render a document back to scenario-file text.

    The output is normalized (every key explicit, full-precision floats);
    parsing it reproduces the document field-by-field.
    """
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            out.write(f"{key} = {value}\n")
        out.write("\n")

    section(
        "lattice",
        [
            ("n_space", doc.n_space),
            ("n_time", doc.n_time),
            ("dx", _fmt(doc.dx)),
            ("dt", _fmt(doc.dt)),
        ],
    )
    section("system", [("mass", _fmt(doc.system_mass))])
    for name, mass, center, radii, amplitude in (
        ("probe_a", doc.probe_a_mass, doc.zone_a_center, doc.zone_a_radii,
         doc.zone_a_amplitude),
        ("probe_b", doc.probe_b_mass, doc.zone_b_center, doc.zone_b_radii,
         doc.zone_b_amplitude),
    ):
        section(
            name,
            [
                ("mass", _fmt(mass)),
                ("zone_t", _fmt(center[0])),
                ("zone_x", _fmt(center[1])),
                ("zone_radius_t", _fmt(radii[0])),
                ("zone_radius_x", _fmt(radii[1])),
                ("zone_amplitude", _fmt(amplitude)),
            ],
        )
    state_pairs = []
    for slot, kind, temp in (
        ("system", doc.system_state, doc.system_temperature),
        ("probe_a", doc.probe_a_state, doc.probe_a_temperature),
        ("probe_b", doc.probe_b_state, doc.probe_b_temperature),
    ):
        state_pairs.append((slot, kind))
        if temp is not None:
            state_pairs.append((f"{slot}_temperature", _fmt(temp)))
    section("states", state_pairs)
    section(
        "modes",
        [
            ("box_t0", _fmt(doc.box_t0)),
            ("box_t1", _fmt(doc.box_t1)),
            ("box_halfwidth", _fmt(doc.box_halfwidth)),
            ("harmonics_t", doc.harmonics_t),
            ("harmonics_x", doc.harmonics_x),
            ("a1", _fmt_list(doc.mode_a1)),
            ("a2", _fmt_list(doc.mode_a2)),
            ("b1", _fmt_list(doc.mode_b1)),
            ("b2", _fmt_list(doc.mode_b2)),
        ],
    )
    raw = doc.couplings_raw
    if "values" in raw:
        section("couplings", [("values", _fmt_list(raw["values"]))])
    elif raw:
        section(
            "couplings",
            [
                ("start", _fmt(raw["start"])),
                ("stop", _fmt(raw["stop"])),
                ("count", raw["count"]),
                ("spacing", raw["spacing"]),
            ],
        )
    else:
        section("couplings", [("values", _fmt_list(doc.lambda_grid))])
    section(
        "sweep",
        [
            ("uncertainty_tol", _fmt(doc.uncertainty_tol)),
            ("critical_tol", _fmt(doc.critical_tol)),
        ],
    )
    return out.getvalue()


def write_document(doc, path):
    """Serialize a document to a file."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_document(doc))


# ---------------------------------------------------------------- CSV output ---

def sweep_csv_text(rows):
    """Render sweep rows as deterministic full-precision CSV text."""
    rows = list(rows)
    if not rows:
        raise ValueError("rows must be nonempty")
    lines = [SWEEP_CSV_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                _fmt(value)
                for value in (
                    row.coupling,
                    row.p_s,
                    row.nu_minus,
                    row.negativity,
                    row.det_a,
                    row.det_b,
                    row.det_c,
                    row.trace_term,
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_sweep_csv(rows, path):
    """Write sweep rows as CSV; byte-identical across runs on equal rows."""
    text = sweep_csv_text(rows)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
