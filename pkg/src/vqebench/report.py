"""CSV export and self-contained SVG figures for run directories.

The SVG writer is deliberately tiny: fixed-precision coordinates and no
timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .core import ContractError
from .engine import RunRecord, ScanPoint, read_records, read_summary, select_records

CSV_COLUMNS = ("seed", "iteration", "energy_ha", "evals", "quantum_time_s")
SCAN_COLUMNS = ("distance_angstrom", "vqe_minimum_ha", "e_fci_ha")


class PlotKind(str, Enum):
    CONVERGENCE = "convergence"
    ENERGY_ERROR_BOX = "energy_error_box"
    DISTANCE_CURVE = "distance_curve"
    GATE_COUNT_BARS = "gate_count_bars"
    OPTIMIZER_COMPARISON = "optimizer_comparison"


@dataclass(frozen=True)
class ReportSpec:
    kind: PlotKind
    inputs: tuple[str, ...]
    output: str | None = None
    exclude_outliers: int = 0
    title: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PlotKind(self.kind))
        if not self.inputs:
            raise ContractError("report needs at least one input directory")
        if self.exclude_outliers < 0:
            raise ContractError("exclude_outliers must be non-negative")


@dataclass
class ReportData:
    """Everything a figure can draw, keyed by dataset label (the run directory name)."""

    runs: dict[str, list[RunRecord]] = field(default_factory=dict)
    summaries: dict[str, dict] = field(default_factory=dict)
    scans: dict[str, list[ScanPoint]] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# CSV


def render_csv(records: Sequence[RunRecord]) -> str:
    if not records:
        raise ContractError("no records to render")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        for i, (e, n, t) in enumerate(zip(r.energies, r.evaluations, r.quantum_time), start=1):
            writer.writerow((r.seed, i, repr(float(e)), n, repr(float(t))))
    return buf.getvalue()


def parse_csv(text: str) -> list[RunRecord]:
    """Inverse of :func:`render_csv`; parameters and config are not part of the CSV."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ContractError(f"unexpected CSV header {reader.fieldnames}")
    by_seed: dict[int, RunRecord] = {}
    for row in reader:
        seed = int(row["seed"])
        rec = by_seed.setdefault(seed, RunRecord(seed, [], [], [], []))
        rec.energies.append(float(row["energy_ha"]))
        rec.evaluations.append(int(row["evals"]))
        rec.quantum_time.append(float(row["quantum_time_s"]))
    return [by_seed[s] for s in sorted(by_seed)]


def render_scan_csv(points: Sequence[ScanPoint]) -> str:
    lines = [",".join(SCAN_COLUMNS)]
    lines += [f"{p.distance:.3f},{p.vqe_minimum:.6f},{p.exact:.6f}" for p in points]
    return "\n".join(lines) + "\n"


def parse_scan_csv(text: str) -> list[ScanPoint]:
    reader = csv.DictReader(io.StringIO(text))
    return [ScanPoint(float(r[SCAN_COLUMNS[0]]), float(r[SCAN_COLUMNS[1]]), float(r[SCAN_COLUMNS[2]])) for r in reader]


# ---------------------------------------------------------------------------
# loading


def load_report_data(spec: ReportSpec) -> ReportData:
    data = ReportData()
    for raw in spec.inputs:
        directory = Path(raw)
        if not directory.is_dir():
            raise ContractError(f"run directory not found: {directory}")
        label = directory.name
        scan_file = directory / "scan.csv"
        if scan_file.exists():
            data.scans[label] = parse_scan_csv(scan_file.read_text())
        if any(directory.glob("seed*.record")):
            data.runs[label] = read_records(directory)
        data.summaries[label] = read_summary(directory)
        if label not in data.scans and label not in data.runs:
            raise ContractError(f"{directory} holds neither seed records nor a scan.csv")
    return data


# ---------------------------------------------------------------------------
# SVG primitives

WIDTH, HEIGHT = 720, 440
MARGIN = {"left": 90, "right": 170, "top": 50, "bottom": 60}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xrange, yrange, yfmt: str = "{:.3f}", xfmt: str = "{:g}"):
        self.parts: list[str] = []
        self.legend: list[tuple[str, str, str]] = []
        self.x0, self.x1 = xrange
        y0, y1 = yrange
        pad = 0.05 * (y1 - y0 or 1.0)
        self.y0, self.y1 = y0 - pad, y1 + pad
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.yfmt, self.xfmt = yfmt, xfmt
        self.plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(self, x: float) -> float:
        span = (self.x1 - self.x0) or 1.0
        return MARGIN["left"] + (x - self.x0) / span * self.plot_w

    def sy(self, y: float) -> float:
        return MARGIN["top"] + (self.y1 - y) / (self.y1 - self.y0) * self.plot_h

    def polyline(self, xs, ys, color, width=1.5, opacity=1.0, dash=None):
        pts = " ".join(f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}"{extra}/>'
        )

    def band(self, xs, lo, hi, color, opacity=0.2):
        upper = [f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(xs, hi)]
        lower = [f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(reversed(xs), reversed(lo))]
        self.parts.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>')

    def hline(self, y, color, label, dash="6,4"):
        self.parts.append(
            f'<line x1="{_f(self.sx(self.x0))}" y1="{_f(self.sy(y))}" x2="{_f(self.sx(self.x1))}" '
            f'y2="{_f(self.sy(y))}" stroke="{color}" stroke-width="1.2" stroke-dasharray="{dash}"/>'
        )
        self.legend.append((label, color, "dash"))

    def rect(self, x, y, w, h, color, opacity=0.8):
        self.parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{color}" fill-opacity="{opacity}" stroke="#333" stroke-width="0.5"/>'
        )

    def line(self, x1, y1, x2, y2, color="#333", width=1.0):
        self.parts.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" stroke="{color}" stroke-width="{width}"/>')

    def marker(self, x, y, color, shape="circle"):
        cx, cy = self.sx(x), self.sy(y)
        if shape == "circle":
            self.parts.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="3.5" fill="{color}"/>')
        else:
            self.parts.append(f'<rect x="{_f(cx - 3.5)}" y="{_f(cy - 3.5)}" width="7" height="7" fill="{color}"/>')

    def text(self, x, y, s, size=11, anchor="start", rotate=None):
        rot = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.parts.append(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" text-anchor="{anchor}"{rot}>{escape(s)}</text>')

    def add_legend(self, label, color, style="line"):
        self.legend.append((label, color, style))

    def render(self, metadata: str, xticks=None, xticklabels=None) -> str:
        left, top = MARGIN["left"], MARGIN["top"]
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif">',
            f"<metadata>{escape(metadata)}</metadata>",
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.2f}" y="24" font-size="15" text-anchor="middle">{escape(self.title)}</text>',
        ]
        axes = _Canvas.__new__(_Canvas)
        axes.__dict__.update(self.__dict__)
        axes.parts = []
        for t in _nice_ticks(self.y0, self.y1):
            y = self.sy(t)
            axes.line(left, y, left + self.plot_w, y, "#e5e5e5", 0.8)
            axes.text(left - 6, y + 4, self.yfmt.format(t), 10, "end")
        ticks = xticks if xticks is not None else _nice_ticks(self.x0, self.x1)
        labels = xticklabels or [self.xfmt.format(t) for t in ticks]
        for t, lab in zip(ticks, labels):
            x = self.sx(t)
            axes.line(x, top + self.plot_h, x, top + self.plot_h + 4)
            axes.text(x, top + self.plot_h + 18, lab, 10, "middle")
        axes.line(left, top, left, top + self.plot_h)
        axes.line(left, top + self.plot_h, left + self.plot_w, top + self.plot_h)
        axes.text(left + self.plot_w / 2, HEIGHT - 18, self.xlabel, 12, "middle")
        axes.text(22, top + self.plot_h / 2, self.ylabel, 12, "middle", rotate=-90)
        out += axes.parts
        out += self.parts
        lx = left + self.plot_w + 15
        for i, (label, color, style) in enumerate(self.legend):
            ly = top + 10 + 18 * i
            if style == "box":
                out.append(f'<rect x="{lx}" y="{ly - 8}" width="14" height="10" fill="{color}" fill-opacity="0.8"/>')
            else:
                dash = ' stroke-dasharray="6,4"' if style == "dash" else ""
                out.append(f'<line x1="{lx}" y1="{ly - 3}" x2="{lx + 18}" y2="{ly - 3}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{lx + 24}" y="{ly + 1}" font-size="10">{escape(label)}</text>')
        out.append(f'<text x="{WIDTH - 6}" y="{HEIGHT - 4}" font-size="8" text-anchor="end" fill="#777">{escape(metadata)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# figures


def _metadata(spec: ReportSpec, data: ReportData) -> str:
    hashes = []
    for label in sorted(set(data.runs) | set(data.summaries)):
        recs = data.runs.get(label)
        h = recs[0].config_hash if recs and recs[0].config else data.summaries.get(label, {}).get("config_hash", "n/a")
        hashes.append(f"{label}={h}")
    return f"kind={spec.kind.value}; exclude_outliers={spec.exclude_outliers}; config-hash: " + ", ".join(hashes)


def _reference(data: ReportData) -> float | None:
    for recs in data.runs.values():
        if recs and recs[0].reference_energy is not None:
            return recs[0].reference_energy
    return None


def _series(records: Sequence[RunRecord]) -> np.ndarray:
    length = min(len(r.energies) for r in records)
    return np.array([r.energies[:length] for r in records])


def band_statistics(records: Sequence[RunRecord], exclude_worst: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-iteration mean and standard deviation over the seeds kept after outlier exclusion."""
    if not records:
        raise ContractError("no records")
    kept = select_records(records, exclude_worst)
    arr = _series(kept)
    return arr.mean(axis=0), arr.std(axis=0)


def _energy_range(values: list[float]) -> tuple[float, float]:
    return min(values), max(values)


def _convergence(spec: ReportSpec, data: ReportData, per_seed: bool) -> str:
    if not data.runs:
        raise ContractError(f"{spec.kind.value} needs seed records")
    ref = _reference(data)
    values: list[float] = [ref] if ref is not None else []
    for recs in data.runs.values():
        values += [e for r in recs for e in r.energies]
    length = max(len(r.energies) for recs in data.runs.values() for r in recs)
    default_title = "Energy convergence" if per_seed else "Optimizer comparison"
    canvas = _Canvas(spec.title or default_title, "iteration", "energy (Ha)", (1, length), _energy_range(values), "{:.3f}")
    for i, (label, recs) in enumerate(sorted(data.runs.items())):
        color = PALETTE[i % len(PALETTE)]
        mean, std = band_statistics(recs, spec.exclude_outliers)
        xs = list(range(1, len(mean) + 1))
        if per_seed:
            for r in recs:
                canvas.polyline(range(1, len(r.energies) + 1), r.energies, color, 0.8, 0.25)
            canvas.band(xs, mean - std, mean + std, color)
        canvas.polyline(xs, mean, color, 2.2)
        kept = len(recs) - spec.exclude_outliers
        canvas.add_legend(f"{label} (mean of {kept})", color)
    if ref is not None:
        canvas.hline(ref, "#000000", f"E_FCI {ref:.6f} Ha")
    return canvas.render(_metadata(spec, data))


def _box_stats(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return min(values), float(q1), float(med), float(q3), max(values)


def _energy_error_box(spec: ReportSpec, data: ReportData) -> str:
    ref = _reference(data)
    if not data.runs or ref is None:
        raise ContractError("energy_error_box needs seed records with a reference energy")
    groups = []
    for label, recs in sorted(data.runs.items()):
        kept = select_records(recs, spec.exclude_outliers)
        errs = [float(np.mean([abs(e - ref) for e in r.energies[-4:]])) for r in kept]
        groups.append((label, errs))
    all_vals = [v for _, errs in groups for v in errs] + [0.0]
    canvas = _Canvas(spec.title or "|E - E_FCI| over the last four iterations", "", "energy error (Ha)",
                     (0, len(groups)), _energy_range(all_vals), "{:.3f}")
    slot = canvas.plot_w / len(groups)
    for i, (label, errs) in enumerate(groups):
        color = PALETTE[i % len(PALETTE)]
        lo, q1, med, q3, hi = _box_stats(errs)
        cx = MARGIN["left"] + slot * (i + 0.5)
        w = slot * 0.4
        canvas.line(cx, canvas.sy(lo), cx, canvas.sy(hi))
        canvas.rect(cx - w / 2, canvas.sy(q3), w, max(canvas.sy(q1) - canvas.sy(q3), 0.5), color, 0.6)
        canvas.line(cx - w / 2, canvas.sy(med), cx + w / 2, canvas.sy(med), "#000", 2)
        canvas.add_legend(f"{label}: median {med:.6f} Ha", color, "box")
    return canvas.render(_metadata(spec, data), [i + 0.5 for i in range(len(groups))], [g[0] for g in groups])


def _distance_curve(spec: ReportSpec, data: ReportData) -> str:
    if not data.scans:
        raise ContractError("distance_curve needs a scan directory with scan.csv")
    pts = [p for scan in data.scans.values() for p in scan]
    xs = [p.distance for p in pts]
    ys = [p.vqe_minimum for p in pts] + [p.exact for p in pts]
    lo, hi = min(xs), max(xs)
    if hi == lo:
        lo, hi = lo - 0.1, hi + 0.1
    canvas = _Canvas(spec.title or "Ground-state energy versus distance", "interatomic distance (Å)", "energy (Ha)",
                     (lo, hi), _energy_range(ys), "{:.3f}", "{:.3f}")
    for i, (label, scan) in enumerate(sorted(data.scans.items())):
        color = PALETTE[i % len(PALETTE)]
        scan = sorted(scan, key=lambda p: p.distance)
        canvas.polyline([p.distance for p in scan], [p.exact for p in scan], "#000000", 1.2, dash="6,4")
        canvas.polyline([p.distance for p in scan], [p.vqe_minimum for p in scan], color, 1.5)
        for p in scan:
            canvas.marker(p.distance, p.exact, "#000000", "square")
            canvas.marker(p.distance, p.vqe_minimum, color)
        canvas.add_legend(f"{label} VQE minimum", color)
    canvas.add_legend("E_FCI", "#000000", "dash")
    ticks = sorted({round(x, 3) for x in xs})
    return canvas.render(_metadata(spec, data), ticks, [f"{t:.3f}" for t in ticks])


def _gate_count_bars(spec: ReportSpec, data: ReportData) -> str:
    rows = []
    for label, summary in sorted(data.summaries.items()):
        t = summary.get("transpile")
        if t:
            rows.append((label, t))
    if not rows:
        raise ContractError("gate_count_bars needs run summaries with transpile reports")
    metrics = ("depth", "two_qubit_gates", "total_gates")
    top = max(t[m] for _, t in rows for m in metrics)
    canvas = _Canvas(spec.title or "Transpiled gate counts and depth", "", "count", (0, len(metrics)), (0, top), "{:.0f}")
    slot = canvas.plot_w / len(metrics)
    width = slot * 0.7 / len(rows)
    for j, (label, t) in enumerate(rows):
        color = PALETTE[j % len(PALETTE)]
        for i, m in enumerate(metrics):
            x = MARGIN["left"] + slot * i + slot * 0.15 + width * j
            canvas.rect(x, canvas.sy(t[m]), width, canvas.sy(0) - canvas.sy(t[m]), color)
            canvas.text(x + width / 2, canvas.sy(t[m]) - 4, str(t[m]), 10, "middle")
        canvas.add_legend(label, color, "box")
    labels = ["depth", "two-qubit gates", "total gates"]
    return canvas.render(_metadata(spec, data), [i + 0.5 for i in range(len(metrics))], labels)


def render_svg(spec: ReportSpec, data: ReportData | Mapping[str, Sequence[RunRecord]] | Sequence[RunRecord]) -> str:
    """Render one figure. ``data`` may be a loaded :class:`ReportData`, a mapping of
    label to records, or a bare list of records (labelled ``runs``)."""
    if not isinstance(data, ReportData):
        if isinstance(data, Mapping):
            runs = {k: list(v) for k, v in data.items()}
        else:
            runs = {"runs": list(data)}
        if not runs or any(not v for v in runs.values()):
            raise ContractError("empty record set")
        data = ReportData(runs=runs)
    kind = spec.kind
    if kind is PlotKind.CONVERGENCE:
        return _convergence(spec, data, per_seed=True)
    if kind is PlotKind.OPTIMIZER_COMPARISON:
        return _convergence(spec, data, per_seed=False)
    if kind is PlotKind.ENERGY_ERROR_BOX:
        return _energy_error_box(spec, data)
    if kind is PlotKind.DISTANCE_CURVE:
        return _distance_curve(spec, data)
    return _gate_count_bars(spec, data)


def write_report(spec: ReportSpec) -> Path:
    data = load_report_data(spec)
    svg = render_svg(spec, data)
    out = Path(spec.output or f"{spec.kind.value}.svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True)
