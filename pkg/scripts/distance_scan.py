"""VQE minimum vs E_FCI over a table of interatomic distances (TOML with [[point]] entries)."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from vqebench.engine import PACKAGE_DIR, ExperimentConfig, distance_scan, load_scan_table
from vqebench.report import PlotKind, ReportSpec, render_scan_csv, write_report


@dataclass
class DistanceScan:
    table: Path = PACKAGE_DIR / "data" / "scan_table.example.toml"
    out: Path = Path("runs/scan")
    target: str | None = None
    seeds: int = 9
    iterations: int = 15


def main(cfg: DistanceScan) -> None:
    config = ExperimentConfig(name="scan", target=cfg.target, noise="full" if cfg.target else "none",
                              seeds=cfg.seeds, iterations=cfg.iterations)
    points = distance_scan(load_scan_table(cfg.table), config)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "scan.csv").write_text(render_scan_csv(points))
    for p in points:
        print(f"{p.distance:.3f} A  VQE {p.vqe_minimum:.6f} Ha  E_FCI {p.exact:.6f} Ha")
    print("figure:", write_report(ReportSpec(PlotKind.DISTANCE_CURVE, (str(cfg.out),), str(cfg.out / "distance_curve.svg"))))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    d = DistanceScan()
    p.add_argument("--table", type=Path, default=d.table)
    p.add_argument("--out", type=Path, default=d.out)
    p.add_argument("--target")
    p.add_argument("--seeds", type=int, default=d.seeds)
    p.add_argument("--iterations", type=int, default=d.iterations)
    main(DistanceScan(**vars(p.parse_args())))
