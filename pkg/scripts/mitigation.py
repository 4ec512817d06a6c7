"""Readout-only noise with and without confusion-matrix mitigation, per seed."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

from vqebench.engine import ExperimentConfig, run_vqe


@dataclass
class MitigationStudy:
    target: str = "manila"
    seeds: int = 9
    shots: int = 200
    iterations: int = 15
    master_seed: int = 2023


def main(cfg: MitigationStudy) -> None:
    base = ExperimentConfig(name="readout", target=cfg.target, noise="readout", seeds=cfg.seeds, shots=cfg.shots,
                            iterations=cfg.iterations, master_seed=cfg.master_seed)
    raw = run_vqe(base)
    mit = run_vqe(base.replace(name="readout-mitigated", mitigate=True))
    print(f"{'seed':>4} {'raw error':>12} {'mitigated':>12}")
    wins = 0
    for r, m in zip(raw, mit):
        er, em = abs(r.final_energy - r.reference_energy), abs(m.final_energy - m.reference_energy)
        wins += em < er
        print(f"{r.seed:>4} {er:>12.6f} {em:>12.6f}")
    print(f"mitigated better on {wins}/{len(raw)} seeds")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    d = MitigationStudy()
    p.add_argument("--target", default=d.target)
    p.add_argument("--seeds", type=int, default=d.seeds)
    p.add_argument("--shots", type=int, default=d.shots)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--master-seed", type=int, default=d.master_seed)
    main(MitigationStudy(**vars(p.parse_args())))
