"""Benchmark VQE on simulated superconducting and trapped-ion hardware models."""

from .core import (
    Circuit,
    ContractError,
    Gate,
    GateKind,
    Observable,
    PauliTerm,
    build_ry_cnot_ansatz,
    exact_ground_energy,
    load_observable,
    parse_observable,
)
from .engine import ExperimentConfig, RunRecord, aggregate, distance_scan, load_config, run_vqe
from .optimizers import CostEvaluator, nelder_mead_minimize, nft_minimize, spsa_minimize
from .transpiler import load_target, transpile

__version__ = "0.1.0"
