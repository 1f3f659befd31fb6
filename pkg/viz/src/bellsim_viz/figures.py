"""Figure builders for the three report kinds.

Inputs are the primary toolkit's documented files: the `analyze` report JSON
(correlation curve, homogeneity panel) and the `sweep` CSV (S versus window
width).  Rendering is read-only and deterministic: a fixed SVG hash salt,
no timestamps, and no randomized layout.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# The quantum reference overlay; the same closed form the primary toolkit's
# oracle uses for singlet targets (E = -cos 2(angle_a - angle_b)).
def singlet_reference(delta: np.ndarray) -> np.ndarray:
    return -np.cos(2.0 * np.asarray(delta))


ERROR_BAR_SIGMAS = 3.0  # drawn bars are +-3 standard errors


class SchemaError(ValueError):
    """The input file does not match the expected report schema."""


@dataclass(frozen=True)
class CurvePoint:
    delta: float
    e: float
    se: float
    label: str


def load_correlation_points(report_path: Path) -> tuple[list[CurvePoint], list[str]]:
    """Extract (angle difference, E, se) per pair; returns (points, skipped)."""
    try:
        doc = json.loads(report_path.read_text())
        entries = doc["pairs"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaError(f"{report_path}: not an analyze report ({exc})") from exc
    points, skipped = [], []
    for entry in entries:
        try:
            label = f"({entry['setting_a']},{entry['setting_b']})"
            if entry.get("correlation") is None:
                skipped.append(label)
                continue
            points.append(CurvePoint(
                delta=float(entry["angle_a"]) - float(entry["angle_b"]),
                e=float(entry["correlation"]["e"]),
                se=float(entry["correlation"]["se"]),
                label=label,
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{report_path}: malformed pair entry ({exc})") from exc
    return points, skipped


def plot_correlation_curve(report_path: Path, out_path: Path,
                           title: str | None = None, dpi: int = 150) -> None:
    """Measured E against analyzer-angle difference, singlet overlay behind."""
    points, skipped = load_correlation_points(report_path)
    if len(points) < 3:
        raise SchemaError(
            f"insufficient pairs: correlation curve needs >= 3, got {len(points)}"
        )
    fig, ax = plt.subplots(figsize=(7, 4.5))
    grid = np.linspace(
        min(p.delta for p in points) - 0.2, max(p.delta for p in points) + 0.2, 400
    )
    ax.plot(grid, singlet_reference(grid), color="#888888", lw=1.2,
            label=r"$-\cos 2\Delta$ reference")
    deltas = [p.delta for p in points]
    es = [p.e for p in points]
    errs = [ERROR_BAR_SIGMAS * p.se for p in points]
    ax.errorbar(deltas, es, yerr=errs, fmt="o", ms=4, capsize=3,
                color="#1f538d", label=f"estimated E (bars: ±{ERROR_BAR_SIGMAS:g} se)")
    for note in skipped:
        ax.annotate(f"skipped {note}: no coincidences",
                    xy=(0.02, 0.04 + 0.05 * skipped.index(note)),
                    xycoords="axes fraction", fontsize=7, color="#a33")
    ax.set_xlabel(r"analyzer angle difference $\Delta$ (rad)")
    ax.set_ylabel("correlation E")
    ax.set_ylim(-1.15, 1.15)
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(title or "correlation vs analyzer angle difference")
    _save(fig, out_path, dpi)


def load_sweep_rows(sweep_path: Path) -> list[dict]:
    with sweep_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["window", "s", "se_s", "coincidence_fraction"]:
            raise SchemaError(f"{sweep_path}: unexpected sweep header {reader.fieldnames}")
        try:
            rows = [
                {k: float(v) for k, v in row.items()}
                for row in reader
            ]
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{sweep_path}: malformed sweep row ({exc})") from exc
    if not rows:
        raise SchemaError(f"{sweep_path}: sweep is empty")
    return rows


def plot_sweep(sweep_path: Path, out_path: Path,
               title: str | None = None, dpi: int = 150) -> None:
    """Post-selected S against window width, classical bound drawn at 2."""
    rows = load_sweep_rows(sweep_path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    w = [r["window"] for r in rows]
    s = [r["s"] for r in rows]
    err = [ERROR_BAR_SIGMAS * r["se_s"] for r in rows]
    ax.axhline(2.0, color="#a33333", lw=1.2, ls="--", label="classical bound 2")
    ax.errorbar(w, s, yerr=err, fmt="o-", ms=4, capsize=3, color="#1f538d",
                label=f"post-selected S (bars: ±{ERROR_BAR_SIGMAS:g} se)")
    ax.set_xscale("log")
    ax.set_xlabel("coincidence window W")
    ax.set_ylabel("CHSH S")
    ax2 = ax.twinx()
    ax2.plot(w, [r["coincidence_fraction"] for r in rows], "s:", ms=3,
             color="#5d8a4a", label="coincidence fraction")
    ax2.set_ylabel("coincidence fraction")
    ax2.set_yscale("log")
    lines1, labels1 = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines1 + lines2, labels1 + labels2, loc="lower left", fontsize=8)
    ax.set_title(title or "post-selected CHSH vs window width")
    _save(fig, out_path, dpi)


def load_homogeneity_pvalues(report_path: Path) -> list[tuple[str, float]]:
    try:
        doc = json.loads(report_path.read_text())
        entries = doc["pairs"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaError(f"{report_path}: not an analyze report ({exc})") from exc
    out = []
    for entry in entries:
        hom = entry.get("homogeneity")
        if hom is None:
            continue
        out.append((f"({entry['setting_a']},{entry['setting_b']})", float(hom["p_value"])))
    if not out:
        raise SchemaError(f"{report_path}: no homogeneity sections present")
    return out


def plot_homogeneity(report_path: Path, out_path: Path,
                     title: str | None = None, dpi: int = 150,
                     alpha: float = 0.05) -> None:
    """Per-pair homogeneity p-values with the rejection level marked."""
    pvals = load_homogeneity_pvalues(report_path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    labels = [lbl for lbl, _ in pvals]
    values = [p for _, p in pvals]
    ax.bar(range(len(values)), values, color="#1f538d", width=0.6)
    ax.axhline(alpha, color="#a33333", ls="--", lw=1.2, label=f"alpha = {alpha:g}")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, fontsize=8)
    ax.set_ylabel("homogeneity p-value")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title(title or "block homogeneity by setting pair")
    _save(fig, out_path, dpi)


def _save(fig, out_path: Path, dpi: int) -> None:
    out_path = Path(out_path)
    if out_path.suffix.lower() not in (".png", ".svg"):
        raise SchemaError(f"unsupported output format {out_path.suffix!r} (png or svg)")
    with plt.rc_context({"svg.hashsalt": "bellsim-viz"}):
        fig.savefig(out_path, dpi=dpi, metadata=_stable_metadata(out_path.suffix.lower()))
    plt.close(fig)


def _stable_metadata(suffix: str) -> dict:
    # Strip the creation date so identical inputs give identical bytes.
    if suffix == ".svg":
        return {"Date": None}
    return {"Software": "bellsim-viz"}
