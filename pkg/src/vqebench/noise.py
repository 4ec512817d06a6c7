"""Hardware calibration profiles, noise channels built from them, and gate-schedule timing."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import PAULI_MATRICES, Circuit, ContractError, Gate, GateKind
from .simulator import KrausChannel

log = logging.getLogger(__name__)

Edge = tuple[int, int]


class CalibrationError(ValueError):
    """Invalid calibration content."""


class ConfigurationError(ValueError):
    """A calibration lacks data an operation needs."""


@dataclass(frozen=True)
class CalibrationData:
    """Error rates, durations (seconds), coherence times (seconds) and readout flips.

    ``single_qubit_error`` and ``single_qubit_duration`` map a gate kind to one
    value per qubit. Two-qubit tables map a gate kind to per-directed-edge values;
    a ``None`` edge key holds the value used for every pair (all-to-all devices).
    """

    name: str
    n_qubits: int
    single_qubit_error: Mapping[str, tuple[float, ...]]
    two_qubit_error: Mapping[str, Mapping[Edge | None, float]]
    single_qubit_duration: Mapping[str, tuple[float, ...]]
    two_qubit_duration: Mapping[str, Mapping[Edge | None, float]]
    t1: tuple[float, ...]
    t2: tuple[float, ...]
    readout_p1_given_0: tuple[float, ...]
    readout_p0_given_1: tuple[float, ...]
    measure_duration: float | None = None

    def __post_init__(self):
        probs = [("readout p(1|0)", v) for v in self.readout_p1_given_0]
        probs += [("readout p(0|1)", v) for v in self.readout_p0_given_1]
        for kind, vals in self.single_qubit_error.items():
            probs += [(f"{kind} error", v) for v in vals]
        for kind, table in self.two_qubit_error.items():
            probs += [(f"{kind} error", v) for v in table.values()]
        for what, v in probs:
            if not 0.0 <= v <= 1.0:
                raise CalibrationError(f"{what} = {v} is not a probability")
        for kind, vals in self.single_qubit_duration.items():
            if any(v < 0 for v in vals):
                raise CalibrationError(f"negative duration for {kind}")
        for kind, table in self.two_qubit_duration.items():
            if any(v <= 0 for v in table.values()):
                raise CalibrationError(f"non-positive duration for {kind}")
        for table in (*self.two_qubit_error.values(), *self.two_qubit_duration.values()):
            for edge in table:
                if edge is not None and (max(edge) >= self.n_qubits or edge[0] == edge[1]):
                    raise CalibrationError(f"edge {edge} invalid for {self.n_qubits} qubits")
        if any(t <= 0 for t in self.t1 + self.t2):
            raise CalibrationError("T1 and T2 must be positive")
        for q, (t1, t2) in enumerate(zip(self.t1, self.t2)):
            if t2 > 2 * t1:
                log.warning("qubit %d: T2=%g exceeds 2*T1=%g", q, t2, 2 * t1)

    def gate_error(self, kind: GateKind | str, qubits: tuple[int, ...]) -> float:
        kind = GateKind(kind).value
        if len(qubits) == 1:
            if kind not in self.single_qubit_error:
                raise ConfigurationError(f"no {kind} error in calibration {self.name}")
            return self.single_qubit_error[kind][qubits[0]]
        return _edge_lookup(self.two_qubit_error, kind, qubits, self.name, "error")

    def gate_duration(self, kind: GateKind | str, qubits: tuple[int, ...]) -> float:
        kind = GateKind(kind).value
        if kind == "measure":
            if self.measure_duration is None:
                raise ConfigurationError(f"no measure duration in calibration {self.name}")
            return self.measure_duration
        if len(qubits) == 1:
            if kind not in self.single_qubit_duration:
                raise ConfigurationError(f"no {kind} duration in calibration {self.name}")
            return self.single_qubit_duration[kind][qubits[0]]
        return _edge_lookup(self.two_qubit_duration, kind, qubits, self.name, "duration")

    def scaled(self, two_qubit_factor: float = 1.0, single_qubit_factor: float = 1.0) -> "CalibrationData":
        """Copy with gate error rates multiplied (clipped at 1); used for sensitivity sweeps."""

        def scale1(table, f):
            return {k: tuple(min(1.0, v * f) for v in vals) for k, vals in table.items()}

        def scale2(table, f):
            return {k: {e: min(1.0, v * f) for e, v in t.items()} for k, t in table.items()}

        return CalibrationData(
            self.name,
            self.n_qubits,
            scale1(self.single_qubit_error, single_qubit_factor),
            scale2(self.two_qubit_error, two_qubit_factor),
            self.single_qubit_duration,
            self.two_qubit_duration,
            self.t1,
            self.t2,
            self.readout_p1_given_0,
            self.readout_p0_given_1,
            self.measure_duration,
        )

    def without_gate_errors(self) -> "CalibrationData":
        return self.scaled(0.0, 0.0)

    def without_readout_errors(self) -> "CalibrationData":
        zeros = (0.0,) * self.n_qubits
        return _replace(self, readout_p1_given_0=zeros, readout_p0_given_1=zeros)


def _replace(cal: CalibrationData, **changes) -> CalibrationData:
    from dataclasses import replace

    return replace(cal, **changes)


def _edge_lookup(table, kind: str, qubits, name: str, what: str) -> float:
    if kind not in table:
        raise ConfigurationError(f"no {kind} {what} in calibration {name}")
    entries = table[kind]
    a, b = qubits
    for key in ((a, b), (b, a), None):
        if key in entries:
            return entries[key]
    raise ConfigurationError(f"no {kind} {what} for qubits {qubits} in calibration {name}")


# ---------------------------------------------------------------------------
# calibration files


def _per_qubit(value, n: int, what: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    if isinstance(value, list):
        if len(value) != n:
            raise CalibrationError(f"{what}: expected {n} per-qubit values, got {len(value)}")
        return tuple(float(v) for v in value)
    if isinstance(value, dict):
        out = [None] * n
        for key, v in value.items():
            q = _qubit_index(key, n, what)
            out[q] = float(v)
        if any(v is None for v in out):
            raise CalibrationError(f"{what}: missing qubits {[q for q, v in enumerate(out) if v is None]}")
        return tuple(out)
    raise CalibrationError(f"{what}: unsupported value {value!r}")


def _qubit_index(key, n: int, what: str) -> int:
    try:
        q = int(key)
    except (TypeError, ValueError):
        raise CalibrationError(f"{what}: bad qubit index {key!r}") from None
    if not 0 <= q < n:
        raise CalibrationError(f"{what}: unknown qubit index {q}")
    return q


def _per_edge(value, n: int, what: str) -> dict[Edge | None, float]:
    if isinstance(value, (int, float)):
        return {None: float(value)}
    if not isinstance(value, dict):
        raise CalibrationError(f"{what}: expected a number or an edge table")
    out: dict[Edge | None, float] = {}
    for key, v in value.items():
        if key == "default":
            out[None] = float(v)
            continue
        parts = str(key).replace("-", "_").split("_")
        if len(parts) != 2:
            raise CalibrationError(f"{what}: bad edge key {key!r}, expected 'a_b'")
        a, b = (_qubit_index(p, n, what) for p in parts)
        if a == b:
            raise CalibrationError(f"{what}: self edge {key!r}")
        out[(a, b)] = float(v)
    return out


def parse_calibration(text: str) -> CalibrationData:
    """Parse a TOML calibration profile.

    Sections: ``single_qubit`` and ``two_qubit`` (error probabilities per gate
    kind), ``durations`` (seconds), ``readout`` (``p1_given_0``/``p0_given_1``
    or a symmetric ``flip``), ``coherence`` (``t1``/``t2``, seconds). Per-qubit
    values may be a scalar, a list, or a table keyed by qubit index; two-qubit
    values a scalar or a table keyed ``"a_b"`` for the directed pair a->b.
    Missing readout defaults to no flips; missing coherence to infinite times.
    """
    if not text.strip():
        raise CalibrationError("empty calibration")
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise CalibrationError(f"malformed calibration: {exc}") from None
    try:
        n = int(doc["n_qubits"])
    except (KeyError, TypeError, ValueError):
        raise CalibrationError("calibration needs an integer n_qubits") from None
    if n < 1:
        raise CalibrationError("n_qubits must be positive")
    known = {"name", "n_qubits", "single_qubit", "two_qubit", "durations", "readout", "coherence"}
    unknown = set(doc) - known
    if unknown:
        raise CalibrationError(f"unknown calibration keys {sorted(unknown)}")

    single = {
        GateKind(k).value: _per_qubit(v, n, f"single_qubit.{k}")
        for k, v in doc.get("single_qubit", {}).items()
    }
    two = {GateKind(k).value: _per_edge(v, n, f"two_qubit.{k}") for k, v in doc.get("two_qubit", {}).items()}
    if not single and not two:
        raise CalibrationError("calibration has no gate errors")

    dur1: dict[str, tuple[float, ...]] = {}
    dur2: dict[str, dict] = {}
    measure = None
    for k, v in doc.get("durations", {}).items():
        kind = GateKind(k)
        if kind is GateKind.MEASURE:
            measure = float(v)
        elif kind.arity == 2:
            dur2[kind.value] = _per_edge(v, n, f"durations.{k}")
        else:
            dur1[kind.value] = _per_qubit(v, n, f"durations.{k}")

    readout = doc.get("readout", {})
    if "flip" in readout:
        p10 = p01 = _per_qubit(readout["flip"], n, "readout.flip")
    else:
        p10 = _per_qubit(readout.get("p1_given_0", 0.0), n, "readout.p1_given_0")
        p01 = _per_qubit(readout.get("p0_given_1", 0.0), n, "readout.p0_given_1")

    coherence = doc.get("coherence", {})
    t1 = _per_qubit(coherence.get("t1", math.inf), n, "coherence.t1")
    t2 = _per_qubit(coherence.get("t2", math.inf), n, "coherence.t2")

    return CalibrationData(
        name=str(doc.get("name", "unnamed")),
        n_qubits=n,
        single_qubit_error=single,
        two_qubit_error=two,
        single_qubit_duration=dur1,
        two_qubit_duration=dur2,
        t1=t1,
        t2=t2,
        readout_p1_given_0=p10,
        readout_p0_given_1=p01,
        measure_duration=measure,
    )


def load_calibration(path: str | Path) -> CalibrationData:
    return parse_calibration(Path(path).read_text())


# ---------------------------------------------------------------------------
# channels


def depolarizing_channel(p: float, arity: int) -> KrausChannel:
    """rho -> (1 - p) rho + p I/d, written as a Pauli mixture."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    if p == 0.0:
        return KrausChannel.identity(arity)
    d2 = 4**arity
    ops = []
    for letters in itertools.product("IXYZ", repeat=arity):
        # letters[0] acts on the low qubit
        mat = np.eye(1, dtype=complex)
        for c in letters:
            mat = np.kron(PAULI_MATRICES[c], mat)
        weight = 1 - p + p / d2 if set(letters) == {"I"} else p / d2
        ops.append(math.sqrt(weight) * mat)
    return KrausChannel(tuple(ops), arity)


def amplitude_damping_channel(gamma: float) -> KrausChannel:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1), 1)


def phase_damping_channel(lam: float) -> KrausChannel:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - lam)]], dtype=complex)
    k1 = np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex)
    return KrausChannel((k0, k1), 1)


def thermal_relaxation_channel(duration: float, t1: float, t2: float) -> KrausChannel:
    """Amplitude damping then pure dephasing so that coherences decay as exp(-t/T2)."""
    if duration <= 0:
        return KrausChannel.identity(1)
    gamma = 0.0 if math.isinf(t1) else 1 - math.exp(-duration / t1)
    rate_phi = 1 / t2 - 1 / (2 * t1)
    lam = 0.0 if rate_phi <= 0 else 1 - math.exp(-2 * duration * rate_phi)
    return amplitude_damping_channel(gamma).then(phase_damping_channel(lam))


def readout_confusion(p1_given_0: float, p0_given_1: float) -> np.ndarray:
    """2x2 column-stochastic matrix, column = prepared state, row = observed."""
    return np.array([[1 - p1_given_0, p0_given_1], [p1_given_0, 1 - p0_given_1]])


@dataclass(frozen=True)
class NoiseModel:
    """Per-(gate kind, qubits) channels plus per-qubit readout confusion.

    ``strict`` models raise on gates they have no channel for; non-strict ones
    treat such gates as noiseless.
    """

    channels: Mapping[tuple[str, tuple[int, ...]], KrausChannel] = field(default_factory=dict)
    readout: tuple[np.ndarray, ...] = ()
    strict: bool = False
    name: str = "ideal"

    def channel_for(self, gate: Gate) -> KrausChannel | None:
        if gate.kind is GateKind.MEASURE:
            return None
        key = (gate.kind.value, gate.qubits)
        if key in self.channels:
            return self.channels[key]
        if len(gate.qubits) == 2:
            rev = (gate.kind.value, gate.qubits[::-1])
            if rev in self.channels:
                return self.channels[rev]
        if self.strict:
            raise ConfigurationError(f"noise model {self.name} has no channel for {key}")
        return None

    def readout_matrix(self, qubit: int) -> np.ndarray:
        if qubit < len(self.readout):
            return self.readout[qubit]
        return np.eye(2)

    @property
    def has_readout_error(self) -> bool:
        return any(np.max(np.abs(m - np.eye(2))) > 0 for m in self.readout)

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()


def build_noise_model(cal: CalibrationData, include_thermal: bool = False) -> NoiseModel:
    """Depolarizing channel per gate at its calibrated error rate, optionally followed by
    thermal relaxation over the gate duration; readout confusion copied per qubit."""
    cache: dict[tuple, KrausChannel] = {}

    def cached(key, build):
        if key not in cache:
            cache[key] = build()
        return cache[key]

    channels: dict[tuple[str, tuple[int, ...]], KrausChannel] = {}
    for kind, errors in cal.single_qubit_error.items():
        for q, p in enumerate(errors):
            chan = cached(("dep", 1, p), lambda p=p: depolarizing_channel(p, 1))
            if include_thermal:
                t = cal.gate_duration(kind, (q,))
                thermal = cached(("th", t, cal.t1[q], cal.t2[q]),
                                 lambda t=t, q=q: thermal_relaxation_channel(t, cal.t1[q], cal.t2[q]))
                chan = chan.then(thermal)
            channels[(kind, (q,))] = chan

    for kind, table in cal.two_qubit_error.items():
        if None in table:
            edges = list(itertools.permutations(range(cal.n_qubits), 2))
        else:
            edges = list(table)
            edges += [e[::-1] for e in table if e[::-1] not in table]
        for edge in edges:
            p = cal.gate_error(kind, edge)
            chan = cached(("dep", 2, p), lambda p=p: depolarizing_channel(p, 2))
            if include_thermal:
                t = cal.gate_duration(kind, edge)
                a, b = edge
                th_a = thermal_relaxation_channel(t, cal.t1[a], cal.t2[a])
                th_b = thermal_relaxation_channel(t, cal.t1[b], cal.t2[b])
                chan = chan.then(th_a.tensor(th_b))
            channels[(kind, edge)] = chan

    readout = tuple(
        readout_confusion(p10, p01) for p10, p01 in zip(cal.readout_p1_given_0, cal.readout_p0_given_1)
    )
    return NoiseModel(channels, readout, strict=True, name=cal.name)


def estimate_duration(circuit: Circuit, cal: CalibrationData) -> float:
    """Critical-path duration of an as-soon-as-possible schedule (seconds).

    Measurements count only if the calibration lists a measure duration.
    """
    ready = [0.0] * circuit.n_qubits
    for g in circuit.gates:
        if g.kind is GateKind.MEASURE and cal.measure_duration is None:
            continue
        if max(g.qubits) >= cal.n_qubits:
            raise ContractError(f"gate on qubits {g.qubits} beyond calibration width {cal.n_qubits}")
        start = max(ready[q] for q in g.qubits)
        finish = start + cal.gate_duration(g.kind, g.qubits)
        for q in g.qubits:
            ready[q] = finish
    return max(ready, default=0.0)
