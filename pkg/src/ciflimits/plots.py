"""Figure rendering for sweep, study and diagnostic outputs.

Every renderer takes tabular data (sweep rows, study results, curves) and
writes a PNG next to the delimited output the CLI produces.
"""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_limit_sweep", "plot_study_rates", "plot_adequacy_curves",
           "plot_km_curve"]


def _load_sweep_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = dict(raw)
            for key in ("exp_g1", "exp_g2", "p1", "kappa1", "kappa2",
                        "beta_star_fg", "beta_star_db6", "beta_star_db3"):
                try:
                    row[key] = float(raw[key])
                except (ValueError, KeyError):
                    row[key] = math.nan
            rows.append(row)
    return rows


def plot_limit_sweep(rows, out_png: str) -> None:
    """Limiting hazard-ratio-scale effects against the competing-event effect.

    One panel per (p1, kappa1) combination; lines per exp_g1 with solid FG
    and dashed DB limits.
    """
    if isinstance(rows, str):
        rows = _load_sweep_rows(rows)
    panels = sorted({(r["p1"], r["kappa1"]) for r in rows})
    ncol = len(panels)
    fig, axes = plt.subplots(1, ncol, figsize=(4.2 * ncol, 3.6),
                             sharey=True, squeeze=False)
    for ax, (p1, k1) in zip(axes[0], panels):
        sub = [r for r in rows if (r["p1"], r["kappa1"]) == (p1, k1)
               and not r.get("error")]
        for eg1 in sorted({r["exp_g1"] for r in sub}):
            pts = sorted((r["exp_g2"], r) for r in sub if r["exp_g1"] == eg1)
            xs = [p[0] for p in pts]
            fg = [math.exp(p[1]["beta_star_fg"]) for p in pts]
            db = [math.exp(p[1]["beta_star_db6"]) for p in pts]
            line, = ax.plot(xs, fg, marker="o", label=f"exp(g1)={eg1:g}")
            ax.plot(xs, db, marker="s", linestyle="--", color=line.get_color())
        ax.axhline(1.0, color="grey", lw=0.8)
        ax.set_xlabel("competing-event hazard ratio")
        ax.set_title(f"p1={p1:g}, kappa1={k1:g}")
    axes[0][0].set_ylabel("limiting CIF-effect (exp scale)")
    axes[0][0].legend(fontsize=8)
    fig.suptitle("FG (solid) and DB R=6 (dashed) limiting effects")
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_study_rates(result, out_png: str, omega: float | None = None) -> None:
    """Grouped bars of empirical rejection rates per scenario."""
    from .study import StudyResult  # local import avoids a cycle

    if not isinstance(result, StudyResult):
        raise TypeError("expected a StudyResult")
    tests = list(result.config.tests)
    omega = result.config.omega if omega is None else omega
    nsc = len(result.scenarios)
    width = 0.8 / max(len(tests), 1)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * nsc), 4.0))
    for j, t in enumerate(tests):
        xs = [i + j * width for i in range(nsc)]
        ys = [s.rejection.get(t, math.nan) for s in result.scenarios]
        ax.bar(xs, ys, width=width, label=t)
    labels = [", ".join(f"{k}={v}" for k, v in s.params.items())
              for s in result.scenarios]
    ax.set_xticks([i + 0.4 for i in range(nsc)])
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
    ax.axhline(omega, color="black", lw=0.8, linestyle=":")
    ax.set_ylabel("rejection rate")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_adequacy_curves(curves: dict, out_png: str) -> None:
    """Cloglog-difference curves; a flat line means the model holds."""
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    for label, (grid, values) in curves.items():
        ax.plot(grid, values, label=str(label))
    ax.set_xlabel("time")
    ax.set_ylabel("cloglog CIF difference between arms")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_km_curve(curve, out_png: str) -> None:
    """Step plot of a censoring survivor curve."""
    fig, ax = plt.subplots(figsize=(5.2, 3.8))
    xs = [0.0]
    ys = [1.0]
    for t, v in zip(curve.times, curve.values):
        xs += [t, t]
        ys += [ys[-1], v]
    ax.plot(xs, ys)
    ax.set_xlabel("time")
    ax.set_ylabel("censoring survival")
    ax.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
