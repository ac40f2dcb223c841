"""Figures for CLI reports, rendered off-screen to image files."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_distribution(rows: Sequence[tuple], path: str, title: str = "distribution",
                      residual: Fraction = Fraction(0), error: Fraction = Fraction(0)) -> str:
    """Bar chart of (label, probability) rows plus residual and error bars."""
    labels = [str(k) for k, _ in rows]
    masses = [float(p) for _, p in rows]
    colors = ["tab:blue"] * len(rows)
    if residual:
        labels.append("residual")
        masses.append(float(residual))
        colors.append("tab:gray")
    if error:
        labels.append("error")
        masses.append(float(error))
        colors.append("tab:red")
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(labels) + 2), 3.2))
    ax.bar(range(len(labels)), masses, color=colors)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45 if len(labels) > 6 else 0, ha="right" if len(labels) > 6 else "center")
    ax.set_ylim(0, 1)
    ax.set_ylabel("probability")
    ax.set_title(title)
    return _save(fig, path)


def plot_convergence(trace: Sequence[Fraction], path: str, title: str = "returned mass") -> str:
    """Returned mass after n steps."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ns = list(range(len(trace)))
    ax.step(ns, [float(x) for x in trace], where="post")
    if len(ns) > 16:
        ax.set_xscale("symlog")
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("steps n")
    ax.set_ylabel("returned mass")
    ax.set_title(title)
    return _save(fig, path)


def plot_rule_suite(reports: Sequence[dict], path: str) -> str:
    """Instances checked per rule; rules with failures are drawn in red."""
    names = [r["rule"] for r in reports]
    counts = [r["instances"] for r in reports]
    colors = ["tab:red" if r["failures"] else "tab:green" for r in reports]
    fig, ax = plt.subplots(figsize=(7, 0.3 * len(names) + 1.2))
    ax.barh(range(len(names)), counts, color=colors)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("instances checked")
    ax.set_title("rule soundness")
    return _save(fig, path)


def plot_advantages(pairs: Sequence[tuple], path: str, title: str = "advantage") -> str:
    """Grouped bars of (label, source advantage, compiled advantage)."""
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(pairs) + 2), 3.2))
    xs = range(len(pairs))
    ax.bar([x - 0.2 for x in xs], [float(s) for _, s, _ in pairs], width=0.4, label="source")
    ax.bar([x + 0.2 for x in xs], [float(t) for _, _, t in pairs], width=0.4, label="compiled")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([lab for lab, _, _ in pairs])
    ax.set_ylim(0, 0.5)
    ax.set_ylabel("|Pr[win] - 1/2|")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)
