"""Pauli observables, gates, circuits and the exact-diagonalization reference.

Conventions used throughout the package:

* basis index ``b`` stores qubit ``q`` in bit ``q`` (qubit 0 is least significant);
* character ``q`` of a Pauli string acts on qubit ``q`` (``"ZIII"`` is Z on qubit 0);
* bitstrings are printed most-significant qubit first, so qubit 0 is the last
  character of a measured bitstring;
* unitaries are compared up to a global phase.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PAULI_LETTERS = "IXYZ"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_UNITARY_QUBITS = 10
MAX_DIAGONALIZATION_QUBITS = 12


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


class ObservableParseError(ValueError):
    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


# ---------------------------------------------------------------------------
# Observables


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    paulis: str

    def __post_init__(self):
        if not self.paulis or any(c not in PAULI_LETTERS for c in self.paulis):
            raise ValueError(f"invalid Pauli string {self.paulis!r}")
        if not math.isfinite(self.coefficient):
            raise ValueError(f"non-finite coefficient for {self.paulis}")

    @property
    def n_qubits(self) -> int:
        return len(self.paulis)

    @property
    def support(self) -> tuple[int, ...]:
        """Qubits on which the term acts non-trivially."""
        return tuple(q for q, c in enumerate(self.paulis) if c != "I")

    @property
    def is_identity(self) -> bool:
        return not self.support

    def matrix(self) -> np.ndarray:
        # kron puts its first factor on the most significant bit, hence the reversal
        return reduce(np.kron, [PAULI_MATRICES[c] for c in reversed(self.paulis)])


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of Pauli strings plus a constant energy offset.

    ``offset`` holds terms that are not part of the qubit operator, such as the
    nuclear repulsion energy of a molecule; it shifts every expectation value
    and eigenvalue without being measured.
    """

    n_qubits: int
    terms: tuple[PauliTerm, ...]
    offset: float = 0.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("an observable needs at least one qubit")
        seen = set()
        for term in self.terms:
            if term.n_qubits != self.n_qubits:
                raise ValueError(
                    f"term {term.paulis} has length {term.n_qubits}, expected {self.n_qubits}"
                )
            if term.paulis in seen:
                raise ValueError(f"duplicate Pauli string {term.paulis}")
            seen.add(term.paulis)
        if not math.isfinite(self.offset):
            raise ValueError("non-finite offset")

    @classmethod
    def from_terms(
        cls, terms: Iterable[tuple[str, float]], offset: float = 0.0
    ) -> "Observable":
        """Build an observable, merging repeated Pauli strings in first-seen order."""
        merged: dict[str, float] = {}
        for paulis, coeff in terms:
            merged[paulis] = merged.get(paulis, 0.0) + float(coeff)
        if not merged:
            raise ValueError("an observable needs at least one term")
        lengths = {len(p) for p in merged}
        if len(lengths) != 1:
            raise ValueError(f"inconsistent Pauli string lengths {sorted(lengths)}")
        return cls(
            lengths.pop(),
            tuple(PauliTerm(c, p) for p, c in merged.items()),
            offset,
        )

    def __len__(self) -> int:
        return len(self.terms)

    def coefficient(self, paulis: str) -> float:
        for term in self.terms:
            if term.paulis == paulis:
                return term.coefficient
        return 0.0

    def matrix(self) -> np.ndarray:
        dim = 2**self.n_qubits
        out = self.offset * np.eye(dim, dtype=complex)
        for term in self.terms:
            out = out + term.coefficient * term.matrix()
        return out


def parse_observable(text: str) -> Observable:
    """Parse the observable text format.

    One ``<pauli-string> <coefficient>`` pair per line; ``#`` starts a comment.
    An optional ``offset <value>`` line adds a constant energy.
    """
    pairs: list[tuple[str, float]] = []
    offset = 0.0
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ObservableParseError(lineno, f"expected '<pauli-string> <coefficient>', got {raw!r}")
        key, value_text = fields
        try:
            value = float(value_text)
        except ValueError:
            raise ObservableParseError(lineno, f"non-numeric coefficient {value_text!r}") from None
        if not math.isfinite(value):
            raise ObservableParseError(lineno, f"non-finite coefficient {value_text!r}")
        if key.lower() == "offset":
            offset += value
            continue
        key = key.upper()
        if any(c not in PAULI_LETTERS for c in key):
            raise ObservableParseError(lineno, f"invalid Pauli string {fields[0]!r}")
        if width is None:
            width = len(key)
        elif len(key) != width:
            raise ObservableParseError(
                lineno, f"Pauli string {key} has length {len(key)}, expected {width}"
            )
        pairs.append((key, value))
    if not pairs:
        raise ObservableParseError(0, "no terms found")
    return Observable.from_terms(pairs, offset)


def serialize_observable(observable: Observable) -> str:
    lines = [f"{t.paulis} {t.coefficient!r}" for t in observable.terms]
    if observable.offset:
        lines.append(f"offset {observable.offset!r}")
    return "\n".join(lines) + "\n"


def load_observable(path: str | Path) -> Observable:
    return parse_observable(Path(path).read_text())


def exact_ground_energy(observable: Observable) -> float:
    """Lowest eigenvalue of the dense observable matrix (offset included)."""
    if observable.n_qubits > MAX_DIAGONALIZATION_QUBITS:
        raise ContractError(
            f"{observable.n_qubits} qubits exceeds the dense limit of {MAX_DIAGONALIZATION_QUBITS}"
        )
    return float(np.linalg.eigvalsh(observable.matrix())[0])


# ---------------------------------------------------------------------------
# Gates and circuits


class GateKind(str, enum.Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    SX = "sx"
    X = "x"
    CX = "cx"
    RXX = "rxx"
    SWAP = "swap"
    MEASURE = "measure"

    @property
    def arity(self) -> int:
        return 2 if self in _TWO_QUBIT else 1

    @property
    def is_rotation(self) -> bool:
        return self in ROTATIONS


_TWO_QUBIT = frozenset({GateKind.CX, GateKind.RXX, GateKind.SWAP})
ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RXX})


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


def rxx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    xx = np.kron(PAULI_MATRICES["X"], PAULI_MATRICES["X"])
    return c * np.eye(4, dtype=complex) - 1j * s * xx


SX_MATRIX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)

# Two-qubit matrices are written for local index (bit of qubits[0]) + 2 * (bit of qubits[1]).
CX_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


@dataclass(frozen=True)
class Gate:
    """A gate instance.

    Parameterized rotations carry ``param`` (the parameter slot) and the bound
    angle is ``angle + scale * values[param]``; for fixed rotations ``angle`` is
    the full angle. Non-rotation kinds carry no angle.
    """

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None
    param: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind is GateKind.MEASURE:
            if len(self.qubits) < 1:
                raise ValueError("measure needs at least one qubit")
        elif len(self.qubits) != kind.arity:
            raise ValueError(f"{kind.value} acts on {kind.arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits) or min(self.qubits) < 0:
            raise ValueError(f"invalid qubit indices {self.qubits}")
        if kind.is_rotation:
            if self.angle is None:
                object.__setattr__(self, "angle", 0.0)
        elif self.angle is not None or self.param is not None:
            raise ValueError(f"{kind.value} takes no angle")

    @property
    def is_parameterized(self) -> bool:
        return self.param is not None

    def bind(self, values: Sequence[float]) -> "Gate":
        if self.param is None:
            return self
        return Gate(self.kind, self.qubits, self.angle + self.scale * float(values[self.param]))

    def matrix(self) -> np.ndarray:
        """Local unitary on ``self.qubits`` (first qubit = least significant)."""
        if self.param is not None:
            raise ContractError(f"gate {self.kind.value}{self.qubits} has an unbound parameter")
        return gate_matrix(self.kind, self.angle)


def gate_matrix(kind: GateKind, angle: float | None = None) -> np.ndarray:
    if kind is GateKind.RX:
        return rx_matrix(angle)
    if kind is GateKind.RY:
        return ry_matrix(angle)
    if kind is GateKind.RZ:
        return rz_matrix(angle)
    if kind is GateKind.SX:
        return SX_MATRIX
    if kind is GateKind.X:
        return PAULI_MATRICES["X"]
    if kind is GateKind.CX:
        return CX_MATRIX
    if kind is GateKind.RXX:
        return rxx_matrix(angle)
    if kind is GateKind.SWAP:
        return SWAP_MATRIX
    raise ContractError(f"{kind.value} has no unitary")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    _slots: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g.kind.value}{g.qubits} outside {self.n_qubits}-qubit circuit")

    @property
    def parameter_slots(self) -> dict[int, tuple[int, ...]]:
        """Parameter index -> positions of the gates using it."""
        if self._slots is None:
            slots: dict[int, list[int]] = {}
            for pos, g in enumerate(self.gates):
                if g.param is not None:
                    slots.setdefault(g.param, []).append(pos)
            object.__setattr__(self, "_slots", {k: tuple(v) for k, v in sorted(slots.items())})
        return self._slots

    @property
    def num_parameters(self) -> int:
        slots = self.parameter_slots
        return max(slots) + 1 if slots else 0

    @property
    def is_bound(self) -> bool:
        return not self.parameter_slots

    def bind(self, values: Sequence[float]) -> "Circuit":
        values = np.asarray(values, dtype=float)
        if len(values) != self.num_parameters:
            raise ContractError(
                f"expected {self.num_parameters} parameter values, got {len(values)}"
            )
        return Circuit(self.n_qubits, tuple(g.bind(values) for g in self.gates))

    def __add__(self, other: "Circuit") -> "Circuit":
        width = max(self.n_qubits, other.n_qubits)
        return Circuit(width, self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def without_measurements(self) -> "Circuit":
        return replace(self, gates=tuple(g for g in self.gates if g.kind is not GateKind.MEASURE))


def build_ry_cnot_ansatz(n_qubits: int) -> Circuit:
    """One parameterized RY per qubit followed by a circular CNOT entangler."""
    if n_qubits < 2:
        raise ContractError(f"the RY-CNOT ansatz needs at least 2 qubits, got {n_qubits}")
    gates = [Gate(GateKind.RY, (q,), 0.0, param=q) for q in range(n_qubits)]
    gates += [Gate(GateKind.CX, (q, (q + 1) % n_qubits)) for q in range(n_qubits)]
    return Circuit(n_qubits, tuple(gates))


def embed_operator(local: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Full 2^n matrix of ``local`` acting on ``qubits``, by explicit index enumeration."""
    dim = 2**n_qubits
    k = len(qubits)
    full = np.zeros((dim, dim), dtype=complex)
    mask = sum(1 << q for q in qubits)
    for col in range(dim):
        rest = col & ~mask
        sub_in = sum(((col >> q) & 1) << i for i, q in enumerate(qubits))
        for sub_out in range(2**k):
            amp = local[sub_out, sub_in]
            if amp == 0:
                continue
            row = rest | sum(((sub_out >> i) & 1) << q for i, q in enumerate(qubits))
            full[row, col] += amp
    return full


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Product of the full-width gate matrices in circuit order."""
    if circuit.n_qubits > MAX_UNITARY_QUBITS:
        raise ContractError(f"circuit_unitary is limited to {MAX_UNITARY_QUBITS} qubits")
    u = np.eye(2**circuit.n_qubits, dtype=complex)
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            raise ContractError("circuit_unitary cannot handle measurements")
        u = embed_operator(g.matrix(), g.qubits, circuit.n_qubits) @ u
    return u


def phase_invariant_distance(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - e^{iφ} b| over entries, with φ aligning the largest overlap."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.max(np.abs(a - phase * b)))
