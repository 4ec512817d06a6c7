"""Transpiled gate counts, depth and estimated circuit duration for both bundled targets."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from vqebench.core import build_ry_cnot_ansatz
from vqebench.engine import resolve_target
from vqebench.noise import estimate_duration, load_calibration
from vqebench.transpiler import equivalent_up_to_layout, transpile


@dataclass
class GateCounts:
    qubits: int = 4
    targets: tuple[str, ...] = ("marmot", "manila")


def main(cfg: GateCounts) -> None:
    ansatz = build_ry_cnot_ansatz(cfg.qubits)
    theta = np.random.default_rng(0).uniform(-np.pi, np.pi, ansatz.num_parameters)
    zeros = np.zeros(ansatz.num_parameters)
    durations = {}
    for name in cfg.targets:
        target = resolve_target(name)
        circuit, report = transpile(ansatz, target)
        durations[name] = estimate_duration(circuit.bind(zeros), load_calibration(target.calibration))
        dist = equivalent_up_to_layout(ansatz.bind(theta), circuit.bind(theta), report.final_layout)
        print(f"[{target.name}]")
        for line in report.lines():
            print(" ", line)
        print(f"  equivalence distance: {dist:.2e}")
        print(f"  estimated duration: {durations[name]:.4e} s")
    if len(durations) == 2:
        a, b = cfg.targets
        print(f"duration ratio {a}/{b}: {durations[a] / durations[b]:.1f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--target", action="append", dest="targets")
    args = p.parse_args()
    main(GateCounts(args.qubits, tuple(args.targets or GateCounts.targets)))
