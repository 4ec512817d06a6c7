"""NFT vs SPSA vs Nelder-Mead on the ideal shot simulator."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from vqebench.engine import ExperimentConfig, aggregate, run_vqe, write_records
from vqebench.report import PlotKind, ReportSpec, write_report

OPTIMIZERS = ("nft", "spsa", "nelder-mead")


@dataclass
class OptimizerComparison:
    out: Path = Path("runs/optimizers")
    seeds: int = 9
    shots: int = 200
    iterations: int = 15
    master_seed: int = 2023


def main(cfg: OptimizerComparison) -> None:
    base = ExperimentConfig(noise="none", seeds=cfg.seeds, shots=cfg.shots, iterations=cfg.iterations,
                            master_seed=cfg.master_seed)
    dirs = []
    print(f"{'optimizer':<12} {'final error (Ha)':>22} {'evaluations':>12}")
    for name in OPTIMIZERS:
        records = run_vqe(base.replace(name=name, optimizer=name))
        dirs.append(str(write_records(records, cfg.out / name)))
        s = aggregate(records)
        fe = s["final_error"]
        print(f"{name:<12} {fe['mean']:>12.6f} +- {fe['std']:.6f} {s['evaluations']['mean']:>12.0f}")
    print("iteration units: NFT sweep over all parameters; SPSA update; Nelder-Mead simplex step")
    out = cfg.out / "optimizer_comparison.svg"
    print("figure:", write_report(ReportSpec(PlotKind.OPTIMIZER_COMPARISON, tuple(dirs), str(out))))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    d = OptimizerComparison()
    p.add_argument("--out", type=Path, default=d.out)
    p.add_argument("--seeds", type=int, default=d.seeds)
    p.add_argument("--shots", type=int, default=d.shots)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--master-seed", type=int, default=d.master_seed)
    main(OptimizerComparison(**vars(p.parse_args())))
