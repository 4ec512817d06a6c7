"""Statevector and density-matrix simulation, expectation values, shot sampling.

Gates are applied locally by tensor contraction on the reshaped state; the full
2^n x 2^n matrix path lives only in :func:`vqebench.core.circuit_unitary`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .core import Circuit, ContractError, Gate, GateKind, Observable, PauliTerm
from .rng import as_generator

if TYPE_CHECKING:
    from .noise import NoiseModel

MAX_DENSITY_QUBITS = 8
MAX_STATEVECTOR_QUBITS = 20


class SimulationSizeError(ContractError):
    pass


# ---------------------------------------------------------------------------
# local tensor contractions


def _apply_local(tensor: np.ndarray, local: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract a k-qubit operator into ``tensor`` along ``axes``.

    ``local`` is indexed with qubits[0] as least significant bit, and ``axes``
    lists the tensor axes of qubits[k-1], ..., qubits[0] (most significant first).
    """
    k = len(axes)
    op = local.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _row_axes(qubits: Sequence[int], n: int) -> list[int]:
    return [n - 1 - q for q in reversed(qubits)]


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.n_qubits)


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    n_qubits: int

    @classmethod
    def zero(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho, n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.entries)), 0.0, None)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple[np.ndarray, ...]
    arity: int

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        dim = 2**self.arity
        if not ops or any(k.shape != (dim, dim) for k in ops):
            raise ValueError(f"Kraus operators must be {dim}x{dim}")
        object.__setattr__(self, "operators", ops)
        err = np.max(np.abs(sum(k.conj().T @ k for k in ops) - np.eye(dim)))
        if err > 1e-10:
            raise ValueError(f"channel is not trace preserving (deviation {err:.2e})")

    @classmethod
    def identity(cls, arity: int) -> "KrausChannel":
        return cls((np.eye(2**arity, dtype=complex),), arity)

    @cached_property
    def superoperator(self) -> np.ndarray:
        """S with vec(ρ') = S vec(ρ) for row-major vec on the local space."""
        return sum(np.kron(k, k.conj()) for k in self.operators)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Channel applying ``self`` first and ``other`` second."""
        if other.arity != self.arity:
            raise ValueError("cannot compose channels of different arity")
        ops = [b @ a for a in self.operators for b in other.operators]
        return KrausChannel(tuple(k for k in ops if np.any(np.abs(k) > 1e-15)), self.arity)

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        """``self`` on the low qubit, ``other`` on the high qubit."""
        ops = [np.kron(b, a) for a in self.operators for b in other.operators]
        return KrausChannel(tuple(ops), self.arity + other.arity)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)


def _apply_channel(rho_t: np.ndarray, channel: KrausChannel, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    rows = _row_axes(qubits, n)
    cols = [n + a for a in rows]
    # superoperator indices: (out_row, out_col), (in_row, in_col), each split into k bits
    sup = channel.superoperator.reshape((2,) * (4 * k))
    out = np.tensordot(sup, rho_t, axes=(list(range(2 * k, 4 * k)), rows + cols))
    return np.moveaxis(out, list(range(2 * k)), rows + cols)


# ---------------------------------------------------------------------------
# runners


def _check_gate(g: Gate) -> None:
    if g.kind is GateKind.MEASURE:
        raise ContractError("measurements are not simulated; sample the final state instead")
    if g.param is not None:
        raise ContractError(f"gate {g.kind.value}{g.qubits} has an unbound parameter")


def run_statevector(circuit: Circuit, initial: StateVector | None = None) -> StateVector:
    n = circuit.n_qubits
    if n > MAX_STATEVECTOR_QUBITS:
        raise SimulationSizeError(f"{n} qubits exceeds the statevector limit {MAX_STATEVECTOR_QUBITS}")
    state = (initial or StateVector.zero(n)).amplitudes.reshape((2,) * n)
    for g in circuit.gates:
        _check_gate(g)
        state = _apply_local(state, g.matrix(), _row_axes(g.qubits, n))
    return StateVector(state.reshape(-1), n)


def run_density(
    circuit: Circuit,
    noise: "NoiseModel | None" = None,
    initial: DensityMatrix | None = None,
) -> DensityMatrix:
    """Evolve |0..0><0..0| through the circuit, applying each gate's noise channel after it.

    Measurement gates are skipped; readout error is left to the measurement step.
    """
    n = circuit.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise SimulationSizeError(f"{n} qubits exceeds the density-matrix limit {MAX_DENSITY_QUBITS}")
    rho = (initial or DensityMatrix.zero(n)).entries.reshape((2,) * (2 * n))
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            continue
        _check_gate(g)
        u = g.matrix()
        rows = _row_axes(g.qubits, n)
        rho = _apply_local(rho, u, rows)
        rho = _apply_local(rho, u.conj(), [n + a for a in rows])
        if noise is not None:
            channel = noise.channel_for(g)
            if channel is not None:
                rho = _apply_channel(rho, channel, g.qubits, n)
    dim = 2**n
    return DensityMatrix(rho.reshape(dim, dim), n)


# ---------------------------------------------------------------------------
# expectation values


def _pauli_action(term: PauliTerm, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """(flip mask, phase vector) with P|b> = phase[b] |b ^ flip>."""
    flip = zy = 0
    n_y = 0
    for q, c in enumerate(term.paulis):
        if c in "XY":
            flip |= 1 << q
        if c in "YZ":
            zy |= 1 << q
        n_y += c == "Y"
    idx = np.arange(dim)
    parity = np.zeros(dim, dtype=np.int64)
    bits = idx & zy
    while np.any(bits):
        parity ^= bits & 1
        bits = bits >> 1
    phase = (1j**n_y) * (1 - 2 * parity)
    return flip, phase


def pauli_expectation(state: StateVector | DensityMatrix, term: PauliTerm) -> float:
    if term.n_qubits != state.n_qubits:
        raise ContractError(f"term acts on {term.n_qubits} qubits, state has {state.n_qubits}")
    dim = 2**state.n_qubits
    flip, phase = _pauli_action(term, dim)
    idx = np.arange(dim)
    if isinstance(state, StateVector):
        psi = state.amplitudes
        value = np.sum(np.conj(psi[idx ^ flip]) * phase * psi)
    else:
        value = np.sum(phase * state.entries[idx, idx ^ flip])
    return float(np.real(value))


def expectation(state: StateVector | DensityMatrix, observable: Observable) -> float:
    if observable.n_qubits != state.n_qubits:
        raise ContractError(
            f"observable acts on {observable.n_qubits} qubits, state has {state.n_qubits}"
        )
    total = observable.offset
    for term in observable.terms:
        if term.is_identity:
            total += term.coefficient
        else:
            total += term.coefficient * pauli_expectation(state, term)
    return float(total)


# ---------------------------------------------------------------------------
# sampling


class Counts(Mapping[str, int]):
    """Bitstring histogram; bitstrings are written most-significant qubit first."""

    def __init__(self, counts: Mapping[str, int], shots: int | None = None):
        data = {str(k): int(v) for k, v in counts.items() if int(v) != 0}
        if any(v < 0 for v in data.values()):
            raise ValueError("counts must be non-negative")
        widths = {len(k) for k in data}
        if len(widths) > 1:
            raise ValueError("bitstrings of different widths")
        total = sum(data.values())
        if shots is not None and shots != total:
            raise ValueError(f"counts sum to {total}, declared shots {shots}")
        self._data = dict(sorted(data.items()))
        self.shots = total
        self.n_qubits = widths.pop() if widths else 0

    @classmethod
    def from_vector(cls, vector: Iterable[int], n_qubits: int) -> "Counts":
        return cls({format(i, f"0{n_qubits}b"): int(c) for i, c in enumerate(vector) if c})

    def __getitem__(self, key: str) -> int:
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __eq__(self, other):
        if isinstance(other, Counts):
            return self._data == other._data
        return dict(self) == other

    def __repr__(self) -> str:
        return f"Counts({self._data}, shots={self.shots})"

    def frequencies(self, n_qubits: int | None = None) -> np.ndarray:
        """Relative frequencies indexed by basis state."""
        n = n_qubits if n_qubits is not None else self.n_qubits
        vec = np.zeros(2**n)
        for bits, c in self._data.items():
            vec[int(bits, 2)] = c
        return vec / max(self.shots, 1)


def sample_distribution(
    probabilities: np.ndarray, shots: int, rng: int | np.random.Generator | None, n_qubits: int
) -> Counts:
    if shots < 1:
        raise ContractError("shots must be at least 1")
    p = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    p = p / p.sum()
    draws = as_generator(rng).multinomial(shots, p)
    return Counts.from_vector(draws, n_qubits)


def sample(
    state: StateVector | DensityMatrix, shots: int, rng_seed: int | np.random.Generator | None = None
) -> Counts:
    """Draw computational-basis outcomes from the Born distribution."""
    return sample_distribution(state.probabilities(), shots, rng_seed, state.n_qubits)
