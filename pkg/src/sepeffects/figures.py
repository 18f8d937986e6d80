"""Matplotlib rendering of the report tables.

Every figure is derived from a table the CLI also writes as CSV, so the
plots are a convenience view, never the only record. Rendering is kept
deterministic (Agg backend, fixed size/dpi, fixed PNG metadata) so that
repeated runs of a seeded command produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_PNG_METADATA = {"Software": "sepeffects"}
_DPI = 150

CURVE_LABELS = {
    "s00": "S00: no surgery, no anesthesia",
    "s01": "S01: anesthesia without surgery",
    "s11": "S11: surgery and anesthesia",
}


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)


def render_survival_curves(curves, path) -> None:
    """Counterfactual survival curves on one axis."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for key, style in (("s00", "-"), ("s01", "--"), ("s11", ":")):
        ax.plot(curves.grid, getattr(curves, key), style, label=CURVE_LABELS[key])
    ax.set_xlabel("time since birth")
    ax.set_ylabel("survival probability (no diagnosis)")
    ax.set_ylim(None, 1.0)
    ax.legend(loc="lower left", fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, path)


def render_sensitivity_curve(curve, path) -> None:
    """Adjusted effect with CI band across the sensitivity grid."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.fill_between(curve.grid, curve.lower, curve.upper, alpha=0.25,
                    color="gray", label="95% CI")
    ax.plot(curve.grid, curve.adjusted, "-", color="black", label="adjusted estimate")
    ax.axhline(1.0, color="red", linestyle=":", linewidth=1, label="null")
    ax.set_xlabel(f"sensitivity parameter ({curve.kind})")
    ax.set_ylabel("adjusted anesthesia effect ratio")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, path)


def render_experiment_metrics(metrics, truths, kind, path) -> None:
    """RMSE and coverage of the adjusted estimate across the grid, with the
    true bias parameter marked."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    grid = metrics["param"].to_numpy()
    true_param = truths.gamma_true if kind == "gamma" else truths.eta_true

    ax1.plot(grid, metrics["rmse"], "o-", color="black", markersize=3)
    ax1.axvline(true_param, color="red", linestyle=":", linewidth=1)
    ax1.set_xlabel(f"sensitivity parameter ({kind})")
    ax1.set_ylabel("RMSE of adjusted estimate")
    ax1.grid(alpha=0.3)

    ax2.plot(grid, metrics["coverage"], "o-", color="black", markersize=3)
    ax2.axhline(0.95, color="gray", linestyle="--", linewidth=1)
    ax2.axvline(true_param, color="red", linestyle=":", linewidth=1)
    ax2.set_xlabel(f"sensitivity parameter ({kind})")
    ax2.set_ylabel("95% CI coverage")
    ax2.set_ylim(0.0, 1.05)
    ax2.grid(alpha=0.3)

    fig.tight_layout()
    _save(fig, path)
