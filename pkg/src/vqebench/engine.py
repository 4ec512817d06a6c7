"""VQE orchestration: per-seed runs, aggregation, distance scans, and run logs."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .core import (
    Circuit,
    ContractError,
    Observable,
    PauliTerm,
    build_ry_cnot_ansatz,
    exact_ground_energy,
    load_observable,
)
from .measurement import (
    MeasurementGroup,
    basis_rotation,
    build_confusion,
    energy_from_counts,
    group_terms,
    measure_counts,
    mitigate,
)
from .noise import (
    CalibrationData,
    ConfigurationError,
    NoiseModel,
    build_noise_model,
    estimate_duration,
    load_calibration,
)
from .optimizers import ITERATION_UNITS, CostEvaluator, run_optimizer
from .rng import STREAM_INIT, STREAM_MONITOR, STREAM_OPTIMIZER, STREAM_SHOTS, make_rng
from .simulator import expectation, run_density, run_statevector
from .transpiler import TranspileReport, TranspileTarget, load_target, transpile

log = logging.getLogger(__name__)

PACKAGE_DIR = Path(__file__).resolve().parent
DEFAULT_OBSERVABLE = PACKAGE_DIR / "data" / "h2_0.735.obs"
TARGETS_DIR = PACKAGE_DIR / "targets"

NOISE_MODES = ("none", "full", "gates", "readout")
ESTIMATORS = ("shots", "exact")


class RunError(RuntimeError):
    """A failure inside a VQE run, annotated with the run it happened in."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a batch of VQE runs.

    ``target`` is a path to a target description or the name of a bundled one
    (``manila``, ``marmot``); ``None`` simulates the logical circuit directly.
    ``noise`` selects which parts of the target's calibration are simulated.
    """

    name: str = "vqe"
    observable: str = str(DEFAULT_OBSERVABLE)
    target: str | None = None
    calibration: str | None = None
    noise: str = "full"
    optimizer: str = "nft"
    optimizer_options: dict[str, Any] = field(default_factory=dict)
    estimator: str = "shots"
    shots: int = 200
    iterations: int = 15
    seeds: int = 9
    init_low: float = -math.pi
    init_high: float = math.pi
    mitigate: bool = False
    thermal: bool = False
    two_qubit_error_scale: float = 1.0
    master_seed: int = 2023
    workers: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be at least 1")
        if self.seeds < 1:
            raise ConfigurationError("seeds must be at least 1")
        if self.shots < 1:
            raise ConfigurationError("shots must be at least 1")
        if self.noise not in NOISE_MODES:
            raise ConfigurationError(f"noise must be one of {NOISE_MODES}, got {self.noise!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigurationError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if not self.init_low < self.init_high:
            raise ConfigurationError("init_low must be below init_high")
        if self.two_qubit_error_scale < 0:
            raise ConfigurationError("two_qubit_error_scale must be non-negative")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def snapshot(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return config_hash(self.snapshot())


def config_hash(snapshot: dict[str, Any]) -> str:
    text = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read an experiment config from TOML; relative file paths resolve against the config's directory."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed config {path}: {exc}") from None
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys in {path}: {sorted(unknown)}")
    for key in ("observable", "target", "calibration"):
        value = doc.get(key)
        if value and not _is_bundled_name(value) and not Path(value).is_absolute():
            doc[key] = str((path.parent / value).resolve())
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**doc)


def _is_bundled_name(value: str) -> bool:
    return "/" not in value and not value.endswith((".tgt", ".obs", ".cal")) and (
        TARGETS_DIR / f"{value}.tgt"
    ).exists()


def resolve_target(spec: str) -> TranspileTarget:
    path = TARGETS_DIR / f"{spec}.tgt" if _is_bundled_name(spec) else Path(spec)
    if not path.exists():
        raise ConfigurationError(f"target file not found: {path}")
    return load_target(path)


# ---------------------------------------------------------------------------
# records


@dataclass
class RunRecord:
    seed: int
    energies: list[float]
    params: list[list[float]]
    evaluations: list[int]
    quantum_time: list[float]
    optimizer_costs: list[float] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)
    reference_energy: float | None = None

    @property
    def final_energy(self) -> float:
        return self.energies[-1]

    @property
    def minimum_energy(self) -> float:
        return min(self.energies)

    @property
    def evaluation_count(self) -> int:
        return self.evaluations[-1] if self.evaluations else 0

    @property
    def total_quantum_time(self) -> float:
        return self.quantum_time[-1] if self.quantum_time else 0.0

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return _record_lines(self) == _record_lines(other)


# ---------------------------------------------------------------------------
# evaluators


@dataclass
class _Setup:
    observable: Observable
    groups: list[MeasurementGroup]
    circuits: list[Circuit]
    measured: list[list[int]]
    noise: NoiseModel | None
    confusion: np.ndarray | None
    duration_per_evaluation: float
    reference: float
    transpile_report: TranspileReport | None
    exact_circuit: Circuit
    exact_observable: Observable
    n_params: int


def _permute_observable(obs: Observable, final_layout: Sequence[int], width: int) -> Observable:
    terms = []
    for t in obs.terms:
        chars = ["I"] * width
        for logical, c in enumerate(t.paulis):
            chars[final_layout[logical]] = c
        terms.append(PauliTerm(t.coefficient, "".join(chars)))
    return Observable(width, tuple(terms), obs.offset)


def _calibration_for(config: ExperimentConfig, target: TranspileTarget | None) -> CalibrationData | None:
    path = config.calibration or (target.calibration if target else None)
    if path is None:
        if config.noise != "none" and target is not None:
            raise ConfigurationError(f"target {target.name} has no calibration and none was given")
        return None
    if not Path(path).exists():
        raise ConfigurationError(f"calibration file not found: {path}")
    cal = load_calibration(path)
    if config.two_qubit_error_scale != 1.0:
        cal = cal.scaled(two_qubit_factor=config.two_qubit_error_scale)
    return cal


def _build_setup(config: ExperimentConfig, observable: Observable | None = None) -> _Setup:
    if observable is None:
        if not Path(config.observable).exists():
            raise ConfigurationError(f"observable file not found: {config.observable}")
        observable = load_observable(config.observable)
    n = observable.n_qubits
    ansatz = build_ry_cnot_ansatz(n)
    groups = group_terms(observable)
    target = resolve_target(config.target) if config.target else None
    cal = _calibration_for(config, target)

    noise = None
    if cal is not None and config.noise != "none":
        effective = cal
        if config.noise == "gates":
            effective = cal.without_readout_errors()
        elif config.noise == "readout":
            effective = cal.without_gate_errors()
        noise = build_noise_model(effective, include_thermal=config.thermal and config.noise != "readout")

    circuits, measured = [], []
    report = None
    for g in groups:
        logical = ansatz + basis_rotation(g, n)
        physical = transpile(logical, target)[0] if target else logical
        circuits.append(physical)
        meas = [gate for gate in physical.gates if gate.kind.value == "measure"]
        measured.append(list(meas[-1].qubits))
    if target:
        exact_circuit, report = transpile(ansatz, target)
        exact_obs = _permute_observable(observable, report.final_layout, exact_circuit.n_qubits)
    else:
        exact_circuit, exact_obs = ansatz, observable

    confusion = None
    if noise is not None and noise.has_readout_error:
        # every group measures the same physical wires only if routing agrees; keep per-group matrices
        confusion = [build_confusion(noise, n, m) for m in measured]

    per_eval = 0.0
    if cal is not None:
        zeros = np.zeros(ansatz.num_parameters)
        if config.estimator == "shots":
            per_eval = sum(estimate_duration(c.bind(zeros), cal) for c in circuits) * config.shots
        else:
            per_eval = estimate_duration(exact_circuit.bind(zeros), cal)

    return _Setup(
        observable=observable,
        groups=groups,
        circuits=circuits,
        measured=measured,
        noise=noise,
        confusion=confusion,
        duration_per_evaluation=per_eval,
        reference=exact_ground_energy(observable),
        transpile_report=report,
        exact_circuit=exact_circuit,
        exact_observable=exact_obs,
        n_params=ansatz.num_parameters,
    )


def _simulate(circuit: Circuit, noise: NoiseModel | None):
    if noise is None:
        return run_statevector(circuit.without_measurements())
    return run_density(circuit, noise)


def make_energy_function(setup: _Setup, config: ExperimentConfig, seed: int, stream: int = STREAM_SHOTS):
    """Cost function of the parameter vector for one seed; shot streams are keyed by call index."""
    counter = {"k": 0}

    def exact(theta: np.ndarray) -> float:
        state = _simulate(setup.exact_circuit.bind(theta), setup.noise)
        return expectation(state, setup.exact_observable)

    def sampled(theta: np.ndarray) -> float:
        k = counter["k"]
        counter["k"] += 1
        pairs = []
        for gi, (group, circuit) in enumerate(zip(setup.groups, setup.circuits)):
            state = _simulate(circuit.bind(theta), setup.noise)
            confusion = setup.confusion[gi] if setup.confusion is not None else None
            rng = make_rng(config.master_seed, seed, stream, k, gi)
            counts = measure_counts(state, config.shots, rng, setup.measured[gi], confusion)
            data = mitigate(counts, confusion) if (config.mitigate and confusion is not None) else counts
            pairs.append((group, data))
        return energy_from_counts(pairs, setup.observable)

    return exact if config.estimator == "exact" else sampled


def _run_seed(config: ExperimentConfig, seed: int, observable: Observable | None = None) -> RunRecord:
    try:
        setup = _build_setup(config, observable)
        x0 = make_rng(config.master_seed, seed, STREAM_INIT).uniform(
            config.init_low, config.init_high, setup.n_params
        )
        evaluator = CostEvaluator(make_energy_function(setup, config, seed))
        trace = run_optimizer(
            config.optimizer,
            evaluator,
            x0,
            config.iterations,
            config.optimizer_options,
            rng=make_rng(config.master_seed, seed, STREAM_OPTIMIZER),
        )
        if evaluator.count != (trace.evaluations[-1] if len(trace) else 0):
            raise RunError("optimizer evaluation count disagrees with evaluator")
        # a fresh measurement at each iterate; optimizers' own costs can be fit predictions
        monitor = make_energy_function(setup, config, seed, STREAM_MONITOR)
        energies = [monitor(p) for p in trace.params]
    except (ContractError, ConfigurationError) as exc:
        raise type(exc)(f"[run {config.name}, seed {seed}] {exc}") from exc
    except RunError as exc:
        raise RunError(f"[run {config.name}, seed {seed}] {exc}") from exc
    except Exception as exc:
        raise RunError(f"[run {config.name}, seed {seed}] {type(exc).__name__}: {exc}") from exc
    return RunRecord(
        seed=seed,
        energies=energies,
        optimizer_costs=list(trace.costs),
        params=[p.tolist() for p in trace.params],
        evaluations=list(trace.evaluations),
        quantum_time=[e * setup.duration_per_evaluation for e in trace.evaluations],
        config=config.snapshot(),
        reference_energy=setup.reference,
    )


def run_vqe(config: ExperimentConfig, observable: Observable | None = None) -> list[RunRecord]:
    """One RunRecord per seed, ordered by seed id; seeds run in parallel when ``workers > 1``."""
    seeds = list(range(config.seeds))
    if config.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(seeds))) as pool:
            records = list(pool.map(_run_seed, [config] * len(seeds), seeds, [observable] * len(seeds)))
    else:
        records = [_run_seed(config, s, observable) for s in seeds]
    return sorted(records, key=lambda r: r.seed)


def transpile_report(config: ExperimentConfig, observable: Observable | None = None) -> TranspileReport | None:
    return _build_setup(config, observable).transpile_report


# ---------------------------------------------------------------------------
# aggregation


def _error(e: float, reference: float) -> float:
    return abs(e - reference)


def _mean_std(values: Sequence[float]) -> dict[str, float]:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std())}


def select_records(records: Sequence[RunRecord], exclude_worst: int = 0, reference: float | None = None) -> list[RunRecord]:
    """Drop the ``exclude_worst`` seeds with the largest final-energy error (highest final energy
    when no reference is known)."""
    if exclude_worst < 0 or exclude_worst >= len(records):
        raise ContractError(f"cannot drop {exclude_worst} of {len(records)} records")
    if exclude_worst == 0:
        return list(records)

    def badness(r: RunRecord) -> float:
        ref = reference if reference is not None else r.reference_energy
        return _error(r.final_energy, ref) if ref is not None else r.final_energy

    ranked = sorted(records, key=lambda r: (badness(r), r.seed))
    keep = {r.seed for r in ranked[: len(records) - exclude_worst]}
    return [r for r in records if r.seed in keep]


def aggregate(records: Sequence[RunRecord], exclude_worst: int = 0, last: int = 4) -> dict[str, Any]:
    """Summary statistics over seeds.

    ``error_last{last}`` averages |E - E_FCI| over each seed's last iterations and
    reports mean/std across seeds; ``error_last{last}_pooled`` pools every
    (seed, iteration) value before taking the std.
    """
    if not records:
        raise ContractError("aggregate needs at least one record")
    reference = records[0].reference_energy
    chosen = select_records(records, exclude_worst, reference)
    summary: dict[str, Any] = {
        "runs": len(chosen),
        "excluded_seeds": sorted({r.seed for r in records} - {r.seed for r in chosen}),
        "reference_energy": reference,
        "final_energy": _mean_std([r.final_energy for r in chosen]),
        "minimum_energy": _mean_std([r.minimum_energy for r in chosen]),
        "quantum_time_s": _mean_std([r.total_quantum_time for r in chosen]),
        "evaluations": _mean_std([r.evaluation_count for r in chosen]),
    }
    if reference is not None:
        per_seed = [np.mean([_error(e, reference) for e in r.energies[-last:]]) for r in chosen]
        pooled = [_error(e, reference) for r in chosen for e in r.energies[-last:]]
        summary["final_error"] = _mean_std([_error(r.final_energy, reference) for r in chosen])
        summary[f"error_last{last}"] = _mean_std(per_seed) | {"std_semantics": "across seeds"}
        summary[f"error_last{last}_pooled"] = _mean_std(pooled) | {"std_semantics": "pooled over seeds and iterations"}
    if chosen[0].config:
        summary["iteration_unit"] = ITERATION_UNITS.get(chosen[0].config.get("optimizer", ""), "")
        summary["config_hash"] = chosen[0].config_hash
    return summary


@dataclass(frozen=True)
class ScanPoint:
    distance: float
    vqe_minimum: float
    exact: float


def distance_scan(table: Sequence[tuple[float, Observable]], config: ExperimentConfig) -> list[ScanPoint]:
    if not table:
        raise ContractError("distance scan needs at least one (distance, observable) entry")
    points = []
    for distance, obs in table:
        records = run_vqe(config, observable=obs)
        points.append(ScanPoint(float(distance), min(r.minimum_energy for r in records), exact_ground_energy(obs)))
    return points


def load_scan_table(path: str | Path) -> list[tuple[float, Observable]]:
    """TOML with ``[[point]]`` entries holding ``distance`` (Å) and ``observable`` (path)."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"scan table not found: {path}")
    doc = tomllib.loads(path.read_text())
    table = []
    for entry in doc.get("point", []):
        obs_path = Path(entry["observable"])
        if not obs_path.is_absolute():
            obs_path = path.parent / obs_path
        if not obs_path.exists():
            raise ConfigurationError(f"observable file not found: {obs_path}")
        table.append((float(entry["distance"]), load_observable(obs_path)))
    return table


# ---------------------------------------------------------------------------
# run logs


def _record_lines(record: RunRecord) -> list[dict[str, Any]]:
    lines: list[dict[str, Any]] = [
        {
            "kind": "header",
            "seed": record.seed,
            "config": record.config,
            "config_hash": record.config_hash,
            "reference_energy": record.reference_energy,
        }
    ]
    costs = record.optimizer_costs or [None] * len(record.energies)
    rows = zip(record.energies, costs, record.params, record.evaluations, record.quantum_time)
    for i, (e, c, p, n, t) in enumerate(rows):
        lines.append(
            {
                "kind": "iteration",
                "iteration": i + 1,
                "energy_ha": e,
                "optimizer_cost": c,
                "params": p,
                "evals": n,
                "quantum_time_s": t,
            }
        )
    lines.append(
        {
            "kind": "result",
            "final_energy": record.final_energy if record.energies else None,
            "minimum_energy": record.minimum_energy if record.energies else None,
            "evaluations": record.evaluation_count,
            "quantum_time_s": record.total_quantum_time,
        }
    )
    return lines


def write_records(records: Sequence[RunRecord], directory: str | Path, extra_summary: dict | None = None) -> Path:
    """Write ``seed<k>.record`` JSON-lines files plus a ``summary`` JSON document."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for r in records:
        text = "\n".join(json.dumps(line, sort_keys=True) for line in _record_lines(r)) + "\n"
        (directory / f"seed{r.seed}.record").write_text(text)
    summary = aggregate(records) if records else {}
    if extra_summary:
        summary.update(extra_summary)
    (directory / "summary").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return directory


def read_record(path: str | Path) -> RunRecord:
    path = Path(path)
    header = None
    energies, costs, params, evals, times = [], [], [], [], []
    for n, raw in enumerate(path.read_text().splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            line = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{path}:{n}: not a JSON record ({exc})") from None
        if line.get("kind") == "header":
            header = line
        elif line.get("kind") == "iteration":
            energies.append(float(line["energy_ha"]))
            if line.get("optimizer_cost") is not None:
                costs.append(float(line["optimizer_cost"]))
            params.append(list(line["params"]))
            evals.append(int(line["evals"]))
            times.append(float(line["quantum_time_s"]))
    if header is None:
        raise ContractError(f"{path}: missing header record")
    return RunRecord(
        seed=int(header["seed"]),
        energies=energies,
        params=params,
        evaluations=evals,
        quantum_time=times,
        optimizer_costs=costs,
        config=header.get("config", {}),
        reference_energy=header.get("reference_energy"),
    )


def read_records(directory: str | Path) -> list[RunRecord]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ContractError(f"run directory not found: {directory}")
    files = sorted(directory.glob("seed*.record"), key=lambda p: int(p.stem[4:]))
    if not files:
        raise ContractError(f"no seed records in {directory}")
    return [read_record(f) for f in files]


def read_summary(directory: str | Path) -> dict[str, Any]:
    path = Path(directory) / "summary"
    return json.loads(path.read_text()) if path.exists() else {}
