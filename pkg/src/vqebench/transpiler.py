"""Basis-gate rewriting, SWAP routing and peephole optimization.

Pipeline used by :func:`transpile`::

    lower to {1q, CX | RXX, SWAP}  ->  route  ->  optimize_passes(basis)

``optimize_passes`` expands SWAPs into CNOTs (oriented to cancel against a
neighbouring CNOT), cancels CNOT pairs, rewrites CNOTs into the target's
two-qubit gate, and then works on single-qubit runs: each maximal run of fixed
single-qubit gates on a wire is merged into one 2x2 matrix and resynthesized in
the basis, and a local search pushes the outer rotation of a run through an
adjacent gate it commutes with (Z through a CNOT control or a parameterized RZ,
X through a CNOT target, an RXX or a parameterized RX) whenever that lowers
(depth, gate count).
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import (
    Circuit,
    ContractError,
    Gate,
    GateKind,
    gate_matrix,
    phase_invariant_distance,
    rx_matrix,
    ry_matrix,
    rz_matrix,
)

TWO_PI = 2 * math.pi
ANGLE_ATOL = 1e-9


class TranspileError(ValueError):
    pass


class RoutingError(TranspileError):
    pass


class DecompositionError(TranspileError):
    pass


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class CouplingMap:
    """Undirected coupling graph; ``full=True`` marks all-to-all connectivity."""

    n_qubits: int
    edges: frozenset[tuple[int, int]] = frozenset()
    full: bool = False

    def __post_init__(self):
        edges = frozenset(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        for a, b in edges:
            if a == b:
                raise ValueError(f"self edge on qubit {a}")
            if b >= self.n_qubits or a < 0:
                raise ValueError(f"edge ({a}, {b}) outside {self.n_qubits} qubits")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def all_to_all(cls, n_qubits: int) -> "CouplingMap":
        return cls(n_qubits, full=True)

    @classmethod
    def line(cls, n_qubits: int) -> "CouplingMap":
        return cls(n_qubits, frozenset((q, q + 1) for q in range(n_qubits - 1)))

    def connected(self, a: int, b: int) -> bool:
        if a == b:
            return False
        return self.full or tuple(sorted((a, b))) in self.edges

    def neighbors(self, q: int) -> list[int]:
        if self.full:
            return [p for p in range(self.n_qubits) if p != q]
        return sorted({b if a == q else a for a, b in self.edges if q in (a, b)})

    def is_connected(self) -> bool:
        if self.n_qubits <= 1 or self.full:
            return True
        seen = {0}
        todo = [0]
        while todo:
            for p in self.neighbors(todo.pop()):
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return len(seen) == self.n_qubits

    def shortest_path(self, src: int, dst: int) -> list[int]:
        """BFS path; neighbours are explored in ascending order, so ties go to lower indices."""
        if self.connected(src, dst):
            return [src, dst]
        prev = {src: None}
        todo = deque([src])
        while todo:
            q = todo.popleft()
            if q == dst:
                break
            for p in self.neighbors(q):
                if p not in prev:
                    prev[p] = q
                    todo.append(p)
        if dst not in prev:
            raise RoutingError(f"no path between physical qubits {src} and {dst}")
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        return path[::-1]

    def restricted(self, n: int) -> "CouplingMap":
        if self.full:
            return CouplingMap.all_to_all(n)
        return CouplingMap(n, frozenset(e for e in self.edges if max(e) < n))


@dataclass(frozen=True)
class TranspileTarget:
    name: str
    basis: frozenset[GateKind]
    coupling: CouplingMap
    calibration: str | None = None

    def __post_init__(self):
        basis = frozenset(GateKind(k) for k in self.basis)
        object.__setattr__(self, "basis", basis)
        if not basis & {GateKind.CX, GateKind.RXX}:
            raise ValueError(f"target {self.name}: basis needs a two-qubit gate (cx or rxx)")
        if GateKind.RZ not in basis or not basis & {GateKind.RX, GateKind.SX}:
            raise ValueError(f"target {self.name}: basis needs rz plus rx or sx")

    @property
    def n_qubits(self) -> int:
        return self.coupling.n_qubits


def parse_target(text: str, source: str | None = None) -> TranspileTarget:
    """Parse a TOML target description: ``name``, ``basis``, ``n_qubits`` and either
    ``edges`` or ``connectivity = "all-to-all"``; optional ``calibration`` file name."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"malformed target description: {exc}") from None
    try:
        n = int(doc["n_qubits"])
        basis = [GateKind(k) for k in doc["basis"]]
    except KeyError as exc:
        raise ValueError(f"target description lacks {exc.args[0]!r}") from None
    if doc.get("connectivity") == "all-to-all":
        coupling = CouplingMap.all_to_all(n)
    else:
        coupling = CouplingMap(n, frozenset(tuple(e) for e in doc.get("edges", [])))
    cal = doc.get("calibration")
    if cal is not None and source is not None:
        cal = str(Path(source).parent / cal)
    return TranspileTarget(str(doc.get("name", "target")), frozenset(basis), coupling, cal)


def load_target(path: str | Path) -> TranspileTarget:
    return parse_target(Path(path).read_text(), source=str(path))


# ---------------------------------------------------------------------------
# metrics


def depth(circuit: Circuit) -> int:
    """Number of layers in a greedy as-soon-as-possible layering; measurements excluded."""
    level = [0] * circuit.n_qubits
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE:
            continue
        top = 1 + max(level[q] for q in g.qubits)
        for q in g.qubits:
            level[q] = top
    return max(level, default=0)


def gate_counts(circuit: Circuit) -> dict[str, int]:
    """Histogram of gate kinds, measurements excluded."""
    hist = Counter(g.kind.value for g in circuit.gates if g.kind is not GateKind.MEASURE)
    return dict(sorted(hist.items()))


def two_qubit_count(circuit: Circuit) -> int:
    return sum(1 for g in circuit.gates if g.kind.arity == 2)


@dataclass(frozen=True)
class TranspileReport:
    depth: int
    total_gates: int
    two_qubit_gates: int
    histogram: dict[str, int]
    initial_layout: tuple[int, ...]
    final_layout: tuple[int, ...]

    def lines(self) -> list[str]:
        hist = ", ".join(f"{k}: {v}" for k, v in self.histogram.items())
        return [
            f"depth: {self.depth}",
            f"total gates: {self.total_gates}",
            f"two-qubit gates: {self.two_qubit_gates}",
            f"gate counts: {hist}",
            f"initial layout: {list(self.initial_layout)}",
            f"final layout: {list(self.final_layout)}",
        ]


def report_for(circuit: Circuit, initial: Sequence[int], final: Sequence[int]) -> TranspileReport:
    hist = gate_counts(circuit)
    return TranspileReport(
        depth=depth(circuit),
        total_gates=sum(hist.values()),
        two_qubit_gates=two_qubit_count(circuit),
        histogram=hist,
        initial_layout=tuple(initial),
        final_layout=tuple(final),
    )


def layout_permutation(final_layout: Sequence[int]) -> np.ndarray:
    """Unitary moving the content of wire ``l`` to wire ``final_layout[l]``."""
    n = len(final_layout)
    dim = 2**n
    perm = np.zeros((dim, dim))
    for b in range(dim):
        out = 0
        for logical, physical in enumerate(final_layout):
            out |= ((b >> logical) & 1) << physical
        perm[out, b] = 1.0
    return perm


# ---------------------------------------------------------------------------
# single-qubit synthesis


def _wrap(angle: float) -> float:
    """Angle in (-pi, pi]."""
    a = math.remainder(angle, TWO_PI)
    return math.pi if math.isclose(a, -math.pi, abs_tol=1e-12) else a


def _is_zero_angle(angle: float) -> bool:
    return abs(math.remainder(angle, TWO_PI)) < ANGLE_ATOL


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(phi, theta, lam) with u = e^{i a} RZ(phi) RY(theta) RZ(lam)."""
    su = u / np.sqrt(np.linalg.det(u))
    a, b = su[0, 0], su[1, 0]
    theta = 2 * math.atan2(abs(b), abs(a))
    if abs(b) < 1e-12:
        plus, minus = -2 * np.angle(a), 0.0
    elif abs(a) < 1e-12:
        plus, minus = 0.0, 2 * np.angle(b)
    else:
        plus, minus = -2 * np.angle(a), 2 * np.angle(b)
    phi = (plus + minus) / 2
    lam = (plus - minus) / 2
    return float(phi), float(theta), float(lam)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _seq(*pairs) -> list[Gate]:
    """Circuit-order gate list from (kind, angle) pairs; zero rotations are dropped and
    the same-axis rotations they leave adjacent are merged."""
    out: list[Gate] = []
    for kind, angle in pairs:
        if kind in (GateKind.RX, GateKind.RY, GateKind.RZ):
            if out and out[-1].kind is kind:
                angle += out.pop().angle
            if not _is_zero_angle(angle):
                out.append(Gate(kind, (0,), _wrap(angle)))
        else:
            out.append(Gate(kind, (0,)))
    return out


def _synth_zxz(u: np.ndarray) -> list[Gate]:
    phi, theta, lam = zyz_angles(u)
    return _seq((GateKind.RZ, lam - math.pi / 2), (GateKind.RX, theta), (GateKind.RZ, phi + math.pi / 2))


def _synth_xzx(u: np.ndarray) -> list[Gate]:
    seq = _synth_zxz(_H @ u @ _H)
    swap = {GateKind.RZ: GateKind.RX, GateKind.RX: GateKind.RZ}
    return [Gate(swap[g.kind], (0,), g.angle) for g in seq]


def _synth_zsx(u: np.ndarray) -> list[Gate]:
    """Rz/SX/X form: at most RZ SX RZ SX RZ, shorter for special polar angles."""
    phi, theta, lam = zyz_angles(u)
    if _is_zero_angle(theta):
        return _seq((GateKind.RZ, phi + lam))
    if abs(theta - math.pi / 2) < ANGLE_ATOL:
        return _seq((GateKind.RZ, lam - math.pi / 2), (GateKind.SX, None), (GateKind.RZ, phi + math.pi / 2))
    if abs(theta - math.pi) < ANGLE_ATOL:
        # RY(pi) = X RZ(pi) up to phase
        return _seq((GateKind.RZ, lam + math.pi), (GateKind.X, None), (GateKind.RZ, phi))
    return _seq(
        (GateKind.RZ, lam),
        (GateKind.SX, None),
        (GateKind.RZ, theta + math.pi),
        (GateKind.SX, None),
        (GateKind.RZ, phi + math.pi),
    )


def _sequence_matrix(seq: Iterable[Gate]) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for g in seq:
        u = gate_matrix(g.kind, g.angle) @ u
    return u


def synthesis_forms(basis: frozenset[GateKind]) -> list:
    forms = []
    if GateKind.RX in basis and GateKind.RZ in basis:
        forms += [_synth_zxz, _synth_xzx]
    if GateKind.SX in basis and GateKind.RZ in basis:
        forms.append(_synth_zsx)
    if not forms:
        raise DecompositionError(f"no single-qubit synthesis for basis {sorted(k.value for k in basis)}")
    return forms


def _is_identity(u: np.ndarray) -> bool:
    return phase_invariant_distance(u, np.eye(2)) < ANGLE_ATOL


def synthesize_1q(u: np.ndarray, basis: frozenset[GateKind], qubit: int = 0) -> list[Gate]:
    """Shortest basis sequence (over the available Euler forms) equal to ``u`` up to phase."""
    if _is_identity(u):
        return []
    best = None
    for form in synthesis_forms(basis):
        seq = form(u)
        if best is None or len(seq) < len(best):
            best = seq
    if phase_invariant_distance(_sequence_matrix(best), u) > 1e-8:
        raise DecompositionError("single-qubit resynthesis failed to reproduce the run")
    return [Gate(g.kind, (qubit,), g.angle) for g in best]


# ---------------------------------------------------------------------------
# two-qubit rewrites


def decompose_cx_to_rxx(control: int, target: int) -> list[Gate]:
    """CNOT as one RXX(pi/2) dressed with single-qubit rotations (equal up to phase)."""
    c, t = control, target
    return [
        Gate(GateKind.RY, (c,), math.pi / 2),
        Gate(GateKind.RXX, (c, t), math.pi / 2),
        Gate(GateKind.RX, (c,), -math.pi / 2),
        Gate(GateKind.RX, (t,), -math.pi / 2),
        Gate(GateKind.RY, (c,), -math.pi / 2),
    ]


def _hadamard_like(q: int) -> list[Gate]:
    # X . RY(pi/2) = H
    return [Gate(GateKind.RY, (q,), math.pi / 2), Gate(GateKind.X, (q,))]


def _rxx_to_cx(g: Gate) -> list[Gate]:
    a, b = g.qubits
    mid = Gate(GateKind.RZ, (b,), g.angle, param=g.param, scale=g.scale)
    return (
        _hadamard_like(a)
        + _hadamard_like(b)
        + [Gate(GateKind.CX, (a, b)), mid, Gate(GateKind.CX, (a, b))]
        + _hadamard_like(a)
        + _hadamard_like(b)
    )


def _swap_cx(a: int, b: int) -> list[Gate]:
    return [Gate(GateKind.CX, (a, b)), Gate(GateKind.CX, (b, a)), Gate(GateKind.CX, (a, b))]


def _is_identity_rotation(g: Gate) -> bool:
    """Bound rotation equal to the identity up to global phase (angle a multiple of 2*pi)."""
    if not g.kind.is_rotation or g.param is not None or g.angle is None:
        return False
    return abs(_wrap(g.angle)) < ANGLE_ATOL


def lower_two_qubit(circuit: Circuit, basis: frozenset[GateKind]) -> Circuit:
    """Rewrite two-qubit gates into CX (or RXX when it is the native gate); SWAP is kept."""
    out: list[Gate] = []
    for g in circuit.gates:
        if _is_identity_rotation(g):
            continue
        if g.kind is GateKind.RXX and GateKind.RXX not in basis:
            if GateKind.CX not in basis:
                raise DecompositionError("basis has no two-qubit gate for rxx")
            out += _rxx_to_cx(g)
        else:
            out.append(g)
    return Circuit(circuit.n_qubits, tuple(out))


# ---------------------------------------------------------------------------
# routing


def route(
    circuit: Circuit, coupling: CouplingMap, initial_layout: Sequence[int] | None = None
) -> tuple[Circuit, tuple[int, ...]]:
    """Insert SWAPs so every two-qubit gate acts on a coupled pair.

    The layout starts as the identity; an uncoupled gate moves its first qubit
    along the BFS shortest path toward the second until they are adjacent.
    Returns the physical circuit and the final layout (logical -> physical) over
    all ``coupling.n_qubits`` wires.
    """
    n = coupling.n_qubits
    if circuit.n_qubits > n:
        raise RoutingError(f"{circuit.n_qubits}-qubit circuit does not fit a {n}-qubit coupling map")
    if not coupling.is_connected():
        raise RoutingError("coupling map is disconnected")
    layout = list(initial_layout) if initial_layout is not None else list(range(n))
    out: list[Gate] = []
    for g in circuit.gates:
        if g.kind.arity == 2:
            a, b = g.qubits
            pa, pb = layout[a], layout[b]
            if not coupling.connected(pa, pb):
                path = coupling.shortest_path(pa, pb)
                for u, v in zip(path[:-2], path[1:-1]):
                    out.append(Gate(GateKind.SWAP, (u, v)))
                    lu, lv = layout.index(u), layout.index(v)
                    layout[lu], layout[lv] = v, u
        out.append(Gate(g.kind, tuple(layout[q] for q in g.qubits), g.angle, g.param, g.scale))
    return Circuit(n, tuple(out)), tuple(layout)


# ---------------------------------------------------------------------------
# CNOT-level peephole


def _wire_neighbors(gates: Sequence[Gate], i: int, step: int) -> list[int | None]:
    """For each qubit of gates[i], index of the nearest gate on that qubit in direction ``step``."""
    found = []
    for q in gates[i].qubits:
        j = i + step
        while 0 <= j < len(gates) and q not in gates[j].qubits:
            j += step
        found.append(j if 0 <= j < len(gates) else None)
    return found


def _adjacent_cx(gates: Sequence[Gate], i: int, step: int) -> Gate | None:
    """The CX sharing both qubits of gates[i] that is next to it on both wires, if any."""
    idx = _wire_neighbors(gates, i, step)
    if idx[0] is None or idx[0] != idx[1]:
        return None
    other = gates[idx[0]]
    if other.kind is GateKind.CX and set(other.qubits) == set(gates[i].qubits):
        return other
    return None


def _expand_swaps(gates: list[Gate]) -> list[Gate]:
    out = list(gates)
    i = 0
    while i < len(out):
        g = out[i]
        if g.kind is GateKind.SWAP:
            a, b = g.qubits
            before = _adjacent_cx(out, i, -1)
            after = _adjacent_cx(out, i, +1)
            if before is not None:
                seq = _swap_cx(*before.qubits)
            elif after is not None:
                seq = _swap_cx(*after.qubits)
            else:
                seq = _swap_cx(min(a, b), max(a, b))
            out[i : i + 1] = seq
            i += len(seq)
        else:
            i += 1
    return out


def _cancel_cx_pairs(gates: list[Gate]) -> list[Gate]:
    out = list(gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(out):
            if g.kind is not GateKind.CX:
                continue
            nxt = _wire_neighbors(out, i, +1)
            j = nxt[0]
            if j is not None and j == nxt[1] and out[j].kind is GateKind.CX and out[j].qubits == g.qubits:
                del out[j]
                del out[i]
                changed = True
                break
    return out


def _merge_rxx_pairs(gates: list[Gate]) -> list[Gate]:
    """Fuse bound RXX gates on the same pair that are adjacent on both wires."""
    out = list(gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(out):
            if g.kind is not GateKind.RXX or g.param is not None:
                continue
            nxt = _wire_neighbors(out, i, +1)
            j = nxt[0]
            if j is None or j != nxt[1]:
                continue
            h = out[j]
            if h.kind is GateKind.RXX and h.param is None and set(h.qubits) == set(g.qubits):
                fused = Gate(GateKind.RXX, g.qubits, g.angle + h.angle)
                del out[j]
                if _is_identity_rotation(fused):
                    del out[i]
                else:
                    out[i] = fused
                changed = True
                break
    return out


# ---------------------------------------------------------------------------
# single-qubit run optimization


@dataclass
class _Run:
    qubit: int
    matrix: np.ndarray
    seq: list[Gate] = field(default_factory=list)


_AXIS = {
    GateKind.RX: "X",
    GateKind.SX: "X",
    GateKind.X: "X",
    GateKind.RZ: "Z",
}


def _edge_angle(g: Gate) -> float:
    if g.kind is GateKind.SX:
        return math.pi / 2
    if g.kind is GateKind.X:
        return math.pi
    return g.angle


def _commuting_axis(item, qubit: int) -> str | None:
    """Rotation axis that commutes with ``item`` on ``qubit`` (None if none)."""
    if isinstance(item, _Run):
        return None
    g: Gate = item
    if g.kind is GateKind.CX:
        return "Z" if qubit == g.qubits[0] else "X"
    if g.kind is GateKind.RXX:
        return "X"
    if g.param is not None and g.kind in (GateKind.RX, GateKind.RZ):
        return _AXIS[g.kind]
    return None


def _param_to_basis(g: Gate, basis: frozenset[GateKind]) -> list:
    """Parameterized rotation as [numeric 2x2 | Gate] items using a basis rotation axis."""
    if g.kind in basis:
        return [g]
    q = (g.qubits[0],)
    axis = GateKind.RZ if GateKind.RZ in basis else GateKind.RX
    core = Gate(axis, q, g.angle, g.param, g.scale)
    half = math.pi / 2
    # R_A(t) = V R_B(t) V^dagger, applied in circuit order as [V^dagger, R_B, V]
    if axis is GateKind.RZ:
        v = {GateKind.RY: rx_matrix(-half), GateKind.RX: ry_matrix(half)}[g.kind]
    else:
        v = {GateKind.RY: rz_matrix(half), GateKind.RZ: ry_matrix(-half)}[g.kind]
    return [(q[0], v.conj().T), core, (q[0], v)]


class _RunOptimizer:
    def __init__(self, n_qubits: int, gates: Sequence[Gate], basis: frozenset[GateKind]):
        self.n = n_qubits
        self.basis = basis
        self.items: list = []
        open_run: dict[int, _Run] = {}
        for g in gates:
            pieces = [g]
            if g.param is not None and g.kind.arity == 1:
                pieces = _param_to_basis(g, basis)
            elif g.kind.arity == 1 and g.kind is not GateKind.MEASURE:
                pieces = [(g.qubits[0], g.matrix())]
            for piece in pieces:
                if isinstance(piece, tuple):
                    q, m = piece
                    run = open_run.get(q)
                    if run is None:
                        run = _Run(q, np.eye(2, dtype=complex))
                        open_run[q] = run
                        self.items.append(run)
                    run.matrix = m @ run.matrix
                else:
                    for q in piece.qubits:
                        open_run.pop(q, None)
                    self.items.append(piece)
        for item in self.items:
            if isinstance(item, _Run):
                item.seq = synthesize_1q(item.matrix, basis, item.qubit)

    # -- helpers -----------------------------------------------------------

    @staticmethod
    def _qubits(item) -> tuple[int, ...]:
        return (item.qubit,) if isinstance(item, _Run) else item.qubits

    def _neighbor(self, items, i: int, qubit: int, step: int) -> int | None:
        j = i + step
        while 0 <= j < len(items):
            if qubit in self._qubits(items[j]):
                return j
            j += step
        return None

    def _emit(self, items) -> list[Gate]:
        out: list[Gate] = []
        for item in items:
            if isinstance(item, _Run):
                out += item.seq
            else:
                out.append(item)
        return out

    def _score(self, items) -> tuple[int, int]:
        gates = self._emit(items)
        return depth(Circuit(self.n, tuple(gates))), len(gates)

    # -- moves -------------------------------------------------------------

    def _candidates(self, items):
        for i, item in enumerate(items):
            if not isinstance(item, _Run):
                continue
            for step in (+1, -1):
                j = self._neighbor(items, i, item.qubit, step)
                if j is None:
                    continue
                axis = _commuting_axis(items[j], item.qubit)
                if axis is None:
                    continue
                for form in synthesis_forms(self.basis):
                    seq = form(item.matrix)
                    if not seq:
                        continue
                    edge = seq[-1] if step > 0 else seq[0]
                    if _AXIS.get(edge.kind) != axis:
                        continue
                    yield i, j, step, edge

    def _apply(self, items, i: int, j: int, step: int, edge: Gate):
        items = [
            _Run(it.qubit, it.matrix.copy(), list(it.seq)) if isinstance(it, _Run) else it for it in items
        ]
        run: _Run = items[i]
        q = run.qubit
        m_edge = gate_matrix(edge.kind, edge.angle)
        # remove the edge rotation from the run
        if step > 0:
            run.matrix = m_edge.conj().T @ run.matrix
        else:
            run.matrix = run.matrix @ m_edge.conj().T
        run.seq = synthesize_1q(run.matrix, self.basis, q)
        boundary = items[j]
        if isinstance(boundary, Gate) and boundary.param is not None:
            items[j] = Gate(boundary.kind, boundary.qubits, boundary.angle + _edge_angle(edge), boundary.param, boundary.scale)
        else:
            k = self._neighbor(items, j, q, step)
            if k is not None and isinstance(items[k], _Run):
                other: _Run = items[k]
                other.matrix = other.matrix @ m_edge if step > 0 else m_edge @ other.matrix
                other.seq = synthesize_1q(other.matrix, self.basis, q)
            else:
                new = _Run(q, m_edge.copy())
                new.seq = synthesize_1q(new.matrix, self.basis, q)
                items.insert(j + 1 if step > 0 else j, new)
        return [it for it in items if not (isinstance(it, _Run) and not it.seq)]

    def optimize(self, max_moves: int = 10_000) -> list[Gate]:
        items = [it for it in self.items if not (isinstance(it, _Run) and not it.seq)]
        score = self._score(items)
        for _ in range(max_moves):
            for cand in self._candidates(items):
                trial = self._apply(items, *cand)
                trial_score = self._score(trial)
                if trial_score < score:
                    items, score = trial, trial_score
                    break
            else:
                break
        return self._emit(items)


def _normalize_parameterized(gates: Iterable[Gate]) -> list[Gate]:
    out = []
    for g in gates:
        if g.param is not None:
            g = Gate(g.kind, g.qubits, _wrap(g.angle), g.param, g.scale)
        out.append(g)
    return out


def optimize_passes(circuit: Circuit, basis: Iterable[GateKind | str]) -> Circuit:
    """Peephole optimization into ``basis``; see the module docstring for the passes."""
    basis = frozenset(GateKind(k) for k in basis)
    gates = list(circuit.gates)
    if any(g.kind is GateKind.SWAP for g in gates) and GateKind.SWAP not in basis:
        gates = _expand_swaps(gates)
    gates = _cancel_cx_pairs(gates)
    if GateKind.CX not in basis:
        lowered = []
        for g in gates:
            if g.kind is GateKind.CX:
                if GateKind.RXX not in basis:
                    raise DecompositionError("basis has no two-qubit gate for cx")
                lowered += decompose_cx_to_rxx(*g.qubits)
            else:
                lowered.append(g)
        gates = lowered
    if GateKind.RXX not in basis and any(g.kind is GateKind.RXX for g in gates):
        gates = list(lower_two_qubit(Circuit(circuit.n_qubits, tuple(gates)), basis).gates)
        gates = _cancel_cx_pairs(gates)
    # single-qubit merges can expose new two-qubit cancellations, so iterate
    while True:
        gates = _RunOptimizer(circuit.n_qubits, gates, basis).optimize()
        merged = _merge_rxx_pairs(_cancel_cx_pairs(gates))
        if len(merged) == len(gates):
            break
        gates = merged
    gates = _normalize_parameterized(gates)
    for g in gates:
        if g.kind not in basis and g.kind is not GateKind.MEASURE:
            raise DecompositionError(f"gate {g.kind.value} survived optimization outside the basis")
    return Circuit(circuit.n_qubits, tuple(gates))


# ---------------------------------------------------------------------------
# full pipeline


def transpile(circuit: Circuit, target: TranspileTarget) -> tuple[Circuit, TranspileReport]:
    """Rewrite ``circuit`` for ``target``.

    Logical qubit i starts on physical qubit i. When the first ``n`` physical
    qubits form a connected subgraph the output keeps the input width;
    otherwise it spans the whole device.
    """
    if circuit.n_qubits > target.n_qubits:
        raise TranspileError(
            f"{circuit.n_qubits}-qubit circuit exceeds target {target.name} ({target.n_qubits} qubits)"
        )
    coupling = target.coupling.restricted(circuit.n_qubits)
    if not coupling.is_connected():
        coupling = target.coupling
    lowered = lower_two_qubit(circuit, target.basis)
    routed, final = route(lowered, coupling)
    optimized = optimize_passes(routed, target.basis)
    initial = tuple(range(coupling.n_qubits))
    return optimized, report_for(optimized, initial, final)


def equivalent_up_to_layout(
    original: Circuit, transpiled: Circuit, final_layout: Sequence[int], atol: float = 1e-8
) -> float:
    """Phase-invariant distance between ``transpiled`` and the layout-permuted ``original``.

    Both circuits must be bound; the original is padded to the transpiled width.
    """
    from .core import circuit_unitary

    width = transpiled.n_qubits
    padded = Circuit(width, original.without_measurements().gates)
    u_in = circuit_unitary(padded)
    u_out = circuit_unitary(transpiled.without_measurements())
    return phase_invariant_distance(u_out, layout_permutation(final_layout) @ u_in)
