"""Qubit-wise commuting measurement groups, basis changes, energies from counts,
and readout-error mitigation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import Circuit, ContractError, Gate, GateKind, Observable, PauliTerm
from .simulator import Counts, DensityMatrix, StateVector, sample_distribution

if TYPE_CHECKING:
    from .noise import NoiseModel


class MitigationError(ValueError):
    """The confusion matrix is too ill-conditioned to invert."""


@dataclass(frozen=True)
class MeasurementGroup:
    """Terms measurable from one set of shots; ``basis[q]`` is the basis measured on qubit q."""

    basis: tuple[str, ...]
    terms: tuple[PauliTerm, ...]

    def __post_init__(self):
        for term in self.terms:
            for q, c in enumerate(term.paulis):
                if c != "I" and c != self.basis[q]:
                    raise ValueError(f"term {term.paulis} incompatible with basis {''.join(self.basis)}")

    @property
    def label(self) -> str:
        return "".join(self.basis)


def _compatible(basis: list[str | None], paulis: str) -> bool:
    return all(c == "I" or b is None or b == c for b, c in zip(basis, paulis))


def group_terms(observable: Observable) -> list[MeasurementGroup]:
    """Greedy qubit-wise commuting grouping in term order; identity terms are not measured.

    Qubits no member constrains are measured in Z.
    """
    bases: list[list[str | None]] = []
    members: list[list[PauliTerm]] = []
    for term in observable.terms:
        if term.is_identity:
            continue
        for basis, group in zip(bases, members):
            if _compatible(basis, term.paulis):
                for q, c in enumerate(term.paulis):
                    if c != "I":
                        basis[q] = c
                group.append(term)
                break
        else:
            bases.append([c if c != "I" else None for c in term.paulis])
            members.append([term])
    return [
        MeasurementGroup(tuple(b or "Z" for b in basis), tuple(group))
        for basis, group in zip(bases, members)
    ]


def basis_rotation(group: MeasurementGroup, n_qubits: int) -> Circuit:
    """Rotations taking the group's basis to Z on every qubit, then a measurement of all qubits."""
    gates: list[Gate] = []
    for q, b in enumerate(group.basis[:n_qubits]):
        if b == "X":
            gates.append(Gate(GateKind.RY, (q,), -math.pi / 2))
        elif b == "Y":
            gates.append(Gate(GateKind.RZ, (q,), -math.pi / 2))
            gates.append(Gate(GateKind.RY, (q,), -math.pi / 2))
    gates.append(Gate(GateKind.MEASURE, tuple(range(n_qubits))))
    return Circuit(n_qubits, tuple(gates))


# ---------------------------------------------------------------------------
# counts -> energies


def _as_distribution(data: Counts | np.ndarray, n_qubits: int) -> np.ndarray:
    if isinstance(data, Counts):
        return data.frequencies(n_qubits)
    vec = np.asarray(data, dtype=float)
    if vec.shape != (2**n_qubits,):
        raise ContractError(f"distribution has shape {vec.shape}, expected ({2**n_qubits},)")
    return vec


def _parity_signs(support: Sequence[int], n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    parity = np.zeros_like(idx)
    for q in support:
        parity ^= (idx >> q) & 1
    return 1 - 2 * parity


def term_expectation(counts: Counts | np.ndarray, term: PauliTerm) -> float:
    """Parity average over the term's support; accepts counts or a (quasi-)distribution."""
    dist = _as_distribution(counts, term.n_qubits)
    total = dist.sum()
    if total <= 0:
        raise ContractError("empty distribution")
    value = float(np.dot(_parity_signs(term.support, term.n_qubits), dist) / total)
    return min(1.0, max(-1.0, value))


def energy_from_counts(
    group_counts: Sequence[tuple[MeasurementGroup, Counts | np.ndarray]], observable: Observable
) -> float:
    covered: dict[str, float] = {}
    for group, data in group_counts:
        for term in group.terms:
            if term.paulis not in covered:
                covered[term.paulis] = term_expectation(data, term)
    energy = observable.offset
    for term in observable.terms:
        if term.is_identity:
            energy += term.coefficient
        elif term.paulis in covered:
            energy += term.coefficient * covered[term.paulis]
        else:
            raise ContractError(f"no measurement group covers term {term.paulis}")
    return float(energy)


# ---------------------------------------------------------------------------
# readout


def build_confusion(noise: "NoiseModel", n_qubits: int, qubits: Sequence[int] | None = None) -> np.ndarray:
    """Tensor product of per-qubit confusion matrices; classical bit i reads ``qubits[i]``."""
    qubits = list(range(n_qubits)) if qubits is None else list(qubits)
    mats = [noise.readout_matrix(q) for q in qubits]
    # kron's first factor is the most significant bit
    return reduce(np.kron, reversed(mats))


def marginal_probabilities(probabilities: np.ndarray, measured: Sequence[int]) -> np.ndarray:
    n = int(round(math.log2(len(probabilities))))
    idx = np.arange(2**n)
    classical = np.zeros_like(idx)
    for i, q in enumerate(measured):
        classical |= ((idx >> q) & 1) << i
    return np.bincount(classical, weights=probabilities, minlength=2 ** len(measured))


def measure_counts(
    state: StateVector | DensityMatrix,
    shots: int,
    rng,
    measured: Sequence[int] | None = None,
    confusion: np.ndarray | None = None,
) -> Counts:
    """Sample classical outcomes of measuring ``measured`` (default: all qubits), with
    optional readout confusion applied to the outcome distribution."""
    measured = list(range(state.n_qubits)) if measured is None else list(measured)
    p = marginal_probabilities(state.probabilities(), measured)
    if confusion is not None:
        p = confusion @ p
    return sample_distribution(p, shots, rng, len(measured))


def mitigate(counts: Counts | np.ndarray, confusion: np.ndarray, max_condition: float = 1e10) -> np.ndarray:
    """Least-squares inversion of the confusion matrix, clipped to a probability vector."""
    n = int(round(math.log2(confusion.shape[0])))
    observed = _as_distribution(counts, n)
    if confusion.shape != (2**n, 2**n):
        raise ContractError(f"confusion shape {confusion.shape} does not match {2**n} outcomes")
    cond = np.linalg.cond(confusion)
    if not np.isfinite(cond) or cond > max_condition:
        raise MitigationError(f"confusion matrix is singular (condition number {cond:.3g})")
    quasi, *_ = np.linalg.lstsq(confusion, observed / observed.sum(), rcond=None)
    quasi = np.clip(quasi, 0.0, None)
    return quasi / quasi.sum()
