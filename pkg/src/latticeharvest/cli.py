"""Command-line interface.

``latticeharvest <subcommand> <scenario.ini> [options]`` with subcommands

``sweep``
    Evaluate the entanglement summary over the coupling grid; CSV to
    standard output or ``-o FILE``; optional ``--plot FILE`` (requires the
    ``plots`` extra).
``critical``
    Locate the smallest entangling coupling by scan plus bisection.
``perturb``
    Print the small-coupling coefficients p0, p2, p4 (and the matching
    uncertainty-bound coefficient) with the sixth-order residual slope.
``signal``
    Decompose one detector's number signal at a given coupling.
``witness``
    Test the post-interaction state for a Gaussian P-representation.
``validate``
    Run solver, state-positivity, causal, and uncertainty diagnostics.

Exit codes: 0 success, 1 validation/diagnostic failure, 2 usage error.
``--seed`` fixes the randomness of every sampled diagnostic.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .lattice import (
    CausalGeometryError,
    DegenerateModeError,
    GeometryError,
    StabilityError,
    TripleFunction,
    causal_future_mask,
    green_apply,
    green_residual,
    is_spacelike,
    theta_apply,
)
from .protocol import (
    SolverResolutionError,
    UnsupportedExpansionError,
    assemble_blocks,
    critical_coupling,
    detector_signal,
    perturbative_residual,
    sweep,
)
from .scenario import (
    ScenarioFormatError,
    parse_scenario,
    sweep_csv_text,
    write_sweep_csv,
)
from .states import SpectrumError, StateConsistencyError, validate_positivity
from .symplectic import (
    UncertaintyViolationError,
    check_uncertainty,
    p_function_witness,
)

__all__ = ["build_parser", "cli_dispatch", "main"]

_VALIDATION_ERRORS = (
    ScenarioFormatError,
    GeometryError,
    CausalGeometryError,
    DegenerateModeError,
    StabilityError,
    SpectrumError,
    StateConsistencyError,
    UncertaintyViolationError,
    SolverResolutionError,
    UnsupportedExpansionError,
    ValueError,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latticeharvest",
        description="Entanglement harvesting on a 1+1D lattice scalar field.",
    )
    parser.add_argument(
        "--seed", type=int, default=0,
        help="seed for all sampled randomness (default 0)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="coupling sweep to CSV")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("-o", "--output", help="CSV path (default: stdout)")
    p_sweep.add_argument(
        "--plot", metavar="FILE",
        help="also render the sweep curves (requires the plots extra)",
    )

    p_crit = sub.add_parser("critical", help="smallest entangling coupling")
    p_crit.add_argument("scenario")
    p_crit.add_argument(
        "--interval", metavar="A,B",
        help="search interval (default: the scenario's coupling grid)",
    )
    p_crit.add_argument(
        "--tol", type=float, default=None,
        help="relative bisection tolerance (default: scenario sweep settings)",
    )

    p_pert = sub.add_parser("perturb", help="small-coupling coefficients")
    p_pert.add_argument("scenario")

    p_sig = sub.add_parser("signal", help="detector number-signal split")
    p_sig.add_argument("scenario")
    p_sig.add_argument("--lambda", dest="coupling", type=float, required=True)
    p_sig.add_argument("--probe", choices=("a", "b"), required=True)

    p_wit = sub.add_parser("witness", help="Gaussian P-representation test")
    p_wit.add_argument("scenario")
    p_wit.add_argument("--lambda", dest="coupling", type=float, required=True)

    p_val = sub.add_parser("validate", help="solver and state diagnostics")
    p_val.add_argument("scenario")
    return parser


def _load(args):
    from .scenario import parse_document, build_scenario

    doc = parse_document(args.scenario)
    return doc, build_scenario(doc)


def _cmd_sweep(args):
    _, scenario = _load(args)
    rows = sweep(scenario)
    if args.output:
        write_sweep_csv(rows, args.output)
    else:
        sys.stdout.write(sweep_csv_text(rows))
    if args.plot:
        try:
            from .plots import plot_sweep
        except ImportError:
            print(
                "error: plotting requires matplotlib "
                "(pip install latticeharvest[plots])",
                file=sys.stderr,
            )
            return 1
        plot_sweep(rows, args.plot)
    return 0


def _cmd_critical(args):
    doc, scenario = _load(args)
    interval = None
    if args.interval:
        parts = args.interval.split(",")
        if len(parts) != 2:
            print("error: --interval expects two numbers A,B", file=sys.stderr)
            return 2
        interval = (float(parts[0]), float(parts[1]))
    tol = args.tol if args.tol is not None else doc.critical_tol
    result = critical_coupling(scenario, search_interval=interval, tol=tol)
    if result.value is None:
        print("no entangling coupling found in range (p_s <= 0 throughout)")
    else:
        print(f"lambda_min = {result.value!r}")
        if result.multiple_crossings:
            print("note: additional sign changes beyond the reported crossing")
    return 0


def _cmd_perturb(args):
    _, scenario = _load(args)
    report = perturbative_residual(scenario)
    coeffs = report.coefficients
    print(f"p0 = {coeffs.p0!r}")
    print(f"p2 = {coeffs.p2!r}")
    print(f"p4 = {coeffs.p4!r}")
    print(f"p4_tilde = {coeffs.p4_tilde!r}")
    if report.inconclusive:
        print("residual slope: inconclusive (residuals at numerical noise)")
    else:
        print(f"residual slope = {report.slope:.3f} (expected about 6)")
    return 0


def _cmd_signal(args):
    _, scenario = _load(args)
    result = detector_signal(scenario, args.coupling, args.probe)
    print(f"total = {result.total!r}")
    print(f"system_part = {result.system_part!r}")
    print(f"probe_part = {result.probe_part!r}")
    return 0


def _cmd_witness(args):
    _, scenario = _load(args)
    cov = assemble_blocks(scenario, args.coupling)
    rep = p_function_witness(cov)
    if rep is None:
        print(
            "no Gaussian P-representation: the state is nonclassical "
            "(entanglement not excluded)"
        )
    elif rep.rank_deficient:
        print("boundary case: degenerate P-representation (classical)")
    else:
        print(
            "Gaussian P-representation exists: classical mixture of coherent "
            f"states, separable (normalization {rep.normalization!r})"
        )
    return 0


def _cmd_validate(args):
    doc, scenario = _load(args)
    lattice = scenario.lattice
    failures = 0

    def report(name, passed, detail):
        nonlocal failures
        flag = "ok" if passed else "FAIL"
        print(f"[{flag}] {name}: {detail}")
        failures += 0 if passed else 1

    # Green operator residuals on the coupling zones, both directions
    bound = 5.0 * max(lattice.dx, lattice.dt) ** 2
    for name, op, f in (
        ("green retarded (system, rho_a)", scenario.system_op, scenario.rho_a),
        ("green advanced (probe A, rho_a)", scenario.probe_a_op, scenario.rho_a),
        ("green advanced (probe B, rho_b)", scenario.probe_b_op, scenario.rho_b),
    ):
        direction = "advanced" if "advanced" in name else "retarded"
        solution = green_apply(op, direction, f)
        residual = green_residual(op, f, solution)
        scale = float(np.max(np.abs(f.values)))
        report(name, residual <= bound * max(scale, 1.0),
               f"residual {residual:.3e} (bound {bound * max(scale, 1.0):.3e})")

    # state positivity sampling
    for name, state in (
        ("system state positivity", scenario.system_state),
        ("probe A state positivity", scenario.probe_a_state),
        ("probe B state positivity", scenario.probe_b_state),
    ):
        rep = validate_positivity(state, sample_count=50, seed=args.seed)
        report(name, rep.passed,
               f"max relative violation {rep.max_relative_violation:.3e}")

    # causal geometry
    spacelike = is_spacelike(
        lattice, scenario.rho_a.support_box, scenario.rho_b.support_box
    )
    print(f"[info] coupling zones spacelike separated: {spacelike}")
    lam_ref = float(scenario.lambda_grid[-1]) or 1.0
    outside = ~causal_future_mask(
        lattice, (scenario.rho_a.support_box, scenario.rho_b.support_box)
    )
    leak = 0.0
    scale = 0.0
    for f, slot in ((scenario.mode_a[0], "probe_a"),
                    (scenario.mode_b[0], "probe_b")):
        image = theta_apply(
            scenario.coupled(lam_ref), TripleFunction.single_slot(f, slot)
        )
        delta = image.system
        leak = max(leak, float(np.max(np.abs(delta[outside]))))
        scale = max(scale, float(np.max(np.abs(delta))))
    report(
        "scattering causal support", leak <= 1e-10 * max(scale, 1e-300),
        f"max reaction outside the zones' causal future {leak:.3e}",
    )

    # uncertainty relation along the grid (ends and middle)
    grid = scenario.lambda_grid
    omega = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    samples = sorted({0, len(grid) // 2, len(grid) - 1})
    worst = np.inf
    for idx in samples:
        cov = assemble_blocks(scenario, float(grid[idx]), tol=doc.uncertainty_tol)
        passed = check_uncertainty(cov, tol=doc.uncertainty_tol)
        eig = float(np.linalg.eigvalsh(cov.gamma + 1j * omega)[0])
        worst = min(worst, eig)
        if not passed:
            break
    report(
        "uncertainty relation on sampled couplings", passed,
        f"min eigenvalue of gamma + i Omega: {worst:.3e}",
    )
    return 1 if failures else 0


_COMMANDS = {
    "sweep": _cmd_sweep,
    "critical": _cmd_critical,
    "perturb": _cmd_perturb,
    "signal": _cmd_signal,
    "witness": _cmd_witness,
    "validate": _cmd_validate,
}


def cli_dispatch(argv=None):
    """Parse arguments and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    return cli_dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
