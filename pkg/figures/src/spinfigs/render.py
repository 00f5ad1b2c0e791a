"""Figure rendering for the long-format experiment CSV.

Input contract: CSV with header
scenario,N,xi,t,site,sz,abs_sx,purity,quality,fidelity,extra
where absent fields are empty.  Four figure kinds are supported:

heatmap  site (vertical) versus time (horizontal) of one value column;
         the color range is fixed to [-1, 1] for sz and [0, 1] for
         abs_sx so panels are comparable across runs.
step     transfer quality versus correlation length, one line per chain
         length, log-x; optional critical-length markers from a
         summary.json.
curve    a per-time scalar (default purity) versus time.
strobe   excited-site population versus time on a log scale for the two
         chain ends, exposing slow envelope decay.

Rendering is idempotent: embedded timestamps are suppressed, so the
same input yields the same output bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_COLUMNS = [
    "scenario", "N", "xi", "t", "site", "sz",
    "abs_sx", "purity", "quality", "fidelity", "extra",
]

KINDS = ("heatmap", "step", "curve", "strobe")

# fixed color ranges keep panels comparable across runs
VALUE_RANGES = {"sz": (-1.0, 1.0), "abs_sx": (0.0, 1.0)}


class SchemaError(ValueError):
    """Input data does not match the experiment CSV contract."""


@dataclass(frozen=True)
class FigureJob:
    input_path: Path
    kind: str
    output_path: Path
    value: str = "sz"
    x: str = "t"  # curve kind: x-axis column (t or N)
    site: int | None = None  # curve kind: restrict to one site
    summary_path: Path | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")


def load_table(path: str | Path) -> list[dict]:
    """Parse the CSV into typed rows; numeric fields become float/None."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None:
        raise SchemaError(f"{path} is empty (no header row)")
    for column in EXPECTED_COLUMNS:
        if column not in reader.fieldnames:
            raise SchemaError(f"column {column!r} missing from {path}")
    rows = []
    for record in reader:
        row = {"scenario": record["scenario"], "extra": record["extra"]}
        for column in EXPECTED_COLUMNS[1:-1]:
            cell = record[column]
            row[column] = float(cell) if cell not in ("", None) else None
        rows.append(row)
    if not rows:
        raise SchemaError(f"{path} contains a header but no data rows")
    return rows


def _require(rows: list[dict], column: str) -> list[dict]:
    present = [r for r in rows if r[column] is not None]
    if not present:
        raise SchemaError(f"no rows with a {column!r} value in the input")
    return present


def pivot_grid(rows: list[dict], value: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(times, sites, grid) with grid[i_site, i_time] = value.

    Row 0 of the grid is the lowest site index, so plotting with
    origin="lower" puts site 1 at the bottom of the heatmap.
    """
    rows = _require(_require(rows, "t"), "site")
    rows = _require(rows, value)
    times = np.array(sorted({r["t"] for r in rows}))
    sites = np.array(sorted({r["site"] for r in rows}))
    t_index = {t: i for i, t in enumerate(times)}
    s_index = {s: i for i, s in enumerate(sites)}
    grid = np.full((sites.size, times.size), np.nan)
    for r in rows:
        grid[s_index[r["site"]], t_index[r["t"]]] = r[value]
    return times, sites, grid


def render(job: FigureJob) -> Path:
    rows = load_table(job.input_path)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    try:
        if job.kind == "heatmap":
            _draw_heatmap(ax, fig, rows, job.value)
        elif job.kind == "step":
            _draw_step(ax, rows, job.summary_path)
        elif job.kind == "curve":
            _draw_curve(ax, rows, job.value, job.x, job.site)
        else:
            _draw_strobe(ax, rows)
        if job.title:
            ax.set_title(job.title)
        fig.tight_layout()
        _save(fig, job.output_path)
    finally:
        plt.close(fig)
    return Path(job.output_path)


def _save(fig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {}
    if path.suffix.lower() == ".png":
        metadata = {"Software": None}
    elif path.suffix.lower() == ".pdf":
        metadata = {"CreationDate": None}
    fig.savefig(path, dpi=150, metadata=metadata)


def _draw_heatmap(ax, fig, rows: list[dict], value: str) -> None:
    if value not in VALUE_RANGES:
        raise SchemaError(f"heatmap value must be one of {sorted(VALUE_RANGES)}, got {value!r}")
    times, sites, grid = pivot_grid(rows, value)
    vmin, vmax = VALUE_RANGES[value]
    dt = (times[-1] - times[0]) / max(times.size - 1, 1)
    image = ax.imshow(
        grid,
        origin="lower",
        aspect="auto",
        extent=(times[0] - dt / 2, times[-1] + dt / 2, sites[0] - 0.5, sites[-1] + 0.5),
        vmin=vmin,
        vmax=vmax,
        cmap="viridis",
    )
    ax.set_xlabel("time")
    ax.set_ylabel("site")
    label = {"sz": r"$\langle\sigma_z\rangle$", "abs_sx": r"$|\langle\sigma_x\rangle|$"}
    fig.colorbar(image, ax=ax, label=label[value])


def _draw_step(ax, rows: list[dict], summary_path: Path | None) -> None:
    rows = _require(_require(rows, "xi"), "quality")
    chain_lengths = sorted({r["N"] for r in rows if r["N"] is not None})
    for n in chain_lengths:
        pts = sorted((r["xi"], r["quality"]) for r in rows if r["N"] == n)
        ax.semilogx([p[0] for p in pts], [p[1] for p in pts], label=f"N = {int(n)}")
    if summary_path is not None:
        summary = json.loads(Path(summary_path).read_text())
        for entry in summary.get("per_n", []):
            if entry.get("xi_c") is not None:
                ax.axvline(entry["xi_c"], color="gray", ls=":", lw=0.8)
    ax.set_xlabel(r"correlation length $\xi/d$")
    ax.set_ylabel("transfer quality")
    ax.legend()


def _draw_curve(ax, rows: list[dict], value: str, x: str, site: int | None) -> None:
    if x not in ("t", "N"):
        raise SchemaError(f"curve x-axis must be 't' or 'N', got {x!r}")
    if site is not None:
        rows = [r for r in rows if r["site"] == site]
    rows = _require(_require(rows, x), value)
    seen: dict[float, float] = {}
    for r in rows:
        seen.setdefault(r[x], r[value])
    xs = sorted(seen)
    marker = "o-" if x == "N" else "-"
    ax.plot(xs, [seen[p] for p in xs], marker)
    ax.set_xlabel("time" if x == "t" else "number of spins")
    ax.set_ylabel(value)


def _draw_strobe(ax, rows: list[dict]) -> None:
    rows = _require(_require(_require(rows, "t"), "site"), "sz")
    sites = sorted({r["site"] for r in rows})
    for site in (sites[0], sites[-1]):
        pts = sorted((r["t"], (r["sz"] + 1.0) / 2.0) for r in rows if r["site"] == site)
        times = [p[0] for p in pts]
        pops = np.maximum([p[1] for p in pts], 1e-16)
        ax.semilogy(times, pops, label=f"site {int(site)}")
    ax.set_xlabel("time")
    ax.set_ylabel("excited population at refocus site")
    ax.legend()
