"""Ideal vs marmot vs manila VQE on shared seeds; writes run directories and figures."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from vqebench.engine import ExperimentConfig, aggregate, run_vqe, transpile_report, write_records
from vqebench.report import PlotKind, ReportSpec, write_report

PROFILES = (("ideal", None, "none"), ("marmot", "marmot", "full"), ("manila", "manila", "full"))


@dataclass
class NoiseComparison:
    out: Path = Path("runs/noise")
    seeds: int = 9
    shots: int = 200
    iterations: int = 15
    master_seed: int = 2023
    thermal: bool = False
    workers: int = 1


def main(cfg: NoiseComparison) -> None:
    base = ExperimentConfig(
        seeds=cfg.seeds, shots=cfg.shots, iterations=cfg.iterations, master_seed=cfg.master_seed,
        thermal=cfg.thermal, workers=cfg.workers,
    )
    dirs = []
    print(f"{'profile':<8} {'final error (Ha)':>22} {'last-4 error (Ha)':>22} {'quantum time (s)':>17}")
    for name, target, noise in PROFILES:
        config = base.replace(name=name, target=target, noise=noise)
        records = run_vqe(config)
        extra = {"config": config.snapshot()}
        report = transpile_report(config)
        if report is not None:
            extra["transpile"] = {"target": target, "depth": report.depth, "total_gates": report.total_gates,
                                  "two_qubit_gates": report.two_qubit_gates, "histogram": report.histogram}
        dirs.append(str(write_records(records, cfg.out / name, extra)))
        s = aggregate(records)
        fe, e4 = s["final_error"], s["error_last4"]
        print(f"{name:<8} {fe['mean']:>12.6f} +- {fe['std']:.6f} {e4['mean']:>12.6f} +- {e4['std']:.6f} "
              f"{s['quantum_time_s']['mean']:>17.4g}")
    for kind in (PlotKind.CONVERGENCE, PlotKind.ENERGY_ERROR_BOX):
        print("figure:", write_report(ReportSpec(kind, tuple(dirs), str(cfg.out / f"{kind.value}.svg"))))
    print("figure:", write_report(ReportSpec(PlotKind.GATE_COUNT_BARS, tuple(dirs[1:]), str(cfg.out / "gate_count_bars.svg"))))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    d = NoiseComparison()
    p.add_argument("--out", type=Path, default=d.out)
    p.add_argument("--seeds", type=int, default=d.seeds)
    p.add_argument("--shots", type=int, default=d.shots)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--master-seed", type=int, default=d.master_seed)
    p.add_argument("--thermal", action="store_true")
    p.add_argument("--workers", type=int, default=d.workers)
    main(NoiseComparison(**vars(p.parse_args())))
