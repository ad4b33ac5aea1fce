"""Optional plotting helpers for coupling sweeps.

This module requires :mod:`matplotlib`, which is not a core dependency;
install the ``plots`` extra to use it.  The CSV output path never imports
this module, so headless pipelines stay free of plotting dependencies.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_sweep"]


def plot_sweep(rows, path):
    """Render the separability indicator and negativity of a sweep.

    Parameters
    ----------
    rows : sequence of SweepRow
        Output of :func:`latticeharvest.protocol.sweep`.
    path : str
        Destination image file; the format follows the extension.

    Notes
    -----
    The top panel shows the separability indicator ``p_s`` against the
    coupling with the entanglement threshold ``p_s = 0`` marked; the bottom
    panel shows the logarithmic negativity alongside the partially
    transposed symplectic eigenvalue ``nu_minus``.
    """
    coupling = np.array([row.coupling for row in rows])
    p_s = np.array([row.p_s for row in rows])
    nu_minus = np.array([row.nu_minus for row in rows])
    negativity = np.array([row.negativity for row in rows])

    fig, (ax_top, ax_bottom) = plt.subplots(
        2, 1, figsize=(6.0, 7.0), sharex=True
    )
    ax_top.plot(coupling, p_s, marker="o", ms=3, lw=1.0, color="tab:blue")
    ax_top.axhline(0.0, color="tab:red", lw=0.8, ls="--",
                   label="separability threshold")
    ax_top.set_ylabel("separability indicator $p_s$")
    ax_top.set_yscale("symlog", linthresh=max(np.abs(p_s).max() * 1e-3, 1e-300))
    ax_top.legend(loc="best", fontsize=8)
    ax_top.grid(alpha=0.3)

    ax_bottom.plot(coupling, negativity, marker="o", ms=3, lw=1.0,
                   color="tab:green", label="log-negativity")
    ax_bottom.plot(coupling, nu_minus, marker="s", ms=3, lw=1.0,
                   color="tab:orange", label=r"$\nu_-$ (PT)")
    ax_bottom.axhline(1.0, color="tab:orange", lw=0.8, ls=":")
    ax_bottom.set_xlabel("coupling")
    ax_bottom.set_ylabel("entanglement measures")
    ax_bottom.legend(loc="best", fontsize=8)
    ax_bottom.grid(alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
