"""Entanglement harvesting by local probes on a 1+1D lattice scalar field.

Subpackages
-----------
symplectic
    Gaussian covariance algebra: uncertainty checks, Simon criterion,
    negativity, Glauber--Sudarshan P-function witness.
lattice
    Periodic 1+1D lattice, smooth test functions, leapfrog retarded and
    advanced Green operators, coupled evolution, scattering (theta) map and
    its Born expansion.
states
    Quasi-free (vacuum / thermal / explicit) states of the lattice field via
    dense mode sums; covariance restriction to local mode pairs.
protocol
    Harvesting scenarios: block assembly, coupling sweeps, critical-coupling
    search, perturbative coefficients, detector signals.
scenario
    INI scenario files, CSV sweep output.
cli
    Command-line interface (``latticeharvest``).
"""

__version__ = "0.1.0"
