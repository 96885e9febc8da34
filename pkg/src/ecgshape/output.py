"""CSV tables and static SVG plots of suppression scans."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .density import DensityScan

CSV_HEADER = "theta_deg,rho_offdiag,rho_diag,ratio"


def _g12(x: float) -> str:
    return "%.12g" % x


def format_scan_csv(scan: DensityScan, metadata: dict | None = None) -> str:
    """CSV text with ``#`` metadata lines before the header; '.' decimals, LF endings."""
    if len(scan.theta_grid) == 0:
        raise ValueError("scan is empty")
    lines = [f"# {k}: {v}" for k, v in (metadata or {}).items()]
    lines.append(CSV_HEADER)
    for t, off, r in zip(scan.theta_grid, scan.offdiag, scan.ratio):
        lines.append(f"{_g12(t)},{_g12(off)},{_g12(scan.diag)},{r:.12f}")
    return "\n".join(lines) + "\n"


def read_scan_csv(path) -> dict[str, np.ndarray]:
    """Columns of a scan CSV as arrays; metadata lines are skipped."""
    with open(path, encoding="utf-8", newline="") as fh:
        table = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    header, rows = table[0], np.array(table[1:], dtype=float).reshape(-1, len(table[0]))
    return {name: rows[:, k] for k, name in enumerate(header)}


def _plot(scans, labels, path: Path, title: str, metadata: dict | None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "ecgshape", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for scan, label in zip(scans, labels):
            ax.plot(scan.theta_grid, scan.ratio, lw=1.2, label=label)
        ax.axhline(1.0, color="0.4", lw=0.8, ls="--")
        ax.set_xlim(0, 360)
        ax.set_xticks(np.arange(0, 361, 60))
        ax.set_xlabel("rotation angle (deg)")
        ax.set_ylabel(r"$\rho(R, O_\theta R) / \rho(R, R)$")
        ax.set_title(title, fontsize=10)
        if len(scans) > 1:
            ax.legend(frameon=False, fontsize=8)
        if metadata:
            fig.text(0.01, 0.01, " ".join(f"{k}={v}" for k, v in metadata.items()), fontsize=5, color="0.5")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "ecgshape"})
        plt.close(fig)


def emit_scan(scan: DensityScan, path, *, metadata: dict | None = None, title: str = "") -> tuple[Path, Path]:
    """Write ``<path>.csv`` and ``<path>.svg``; returns both paths."""
    base = Path(path)
    if base.suffix in (".csv", ".svg"):
        base = base.with_suffix("")
    csv_path, svg_path = base.with_suffix(".csv"), base.with_suffix(".svg")
    text = format_scan_csv(scan, metadata)
    try:
        base.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        _plot([scan], [f"particle {scan.particle}"], svg_path, title or f"particle {scan.particle}, |R| = {scan.radius:.3f} bohr", metadata)
    except OSError as exc:
        raise OSError(f"cannot write scan output at {base}: {exc}") from exc
    return csv_path, svg_path


def emit_overlay(scans, labels, path, *, metadata: dict | None = None, title: str = "") -> Path:
    """Several scans on one SVG, as in a family comparison."""
    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    _plot(list(scans), list(labels), path, title, metadata)
    return path
