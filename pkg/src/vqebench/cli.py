"""Command-line entry point: ``vqebench {ham,transpile,vqe,scan,report}``.

Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ContractError, ObservableParseError, build_ry_cnot_ansatz, exact_ground_energy, load_observable
from .engine import (
    DEFAULT_OBSERVABLE,
    ExperimentConfig,
    RunError,
    aggregate,
    distance_scan,
    load_config,
    load_scan_table,
    resolve_target,
    run_vqe,
    transpile_report,
    write_records,
)
from .noise import CalibrationError, ConfigurationError
from .optimizers import OptimizerConfigError
from .report import PlotKind, ReportSpec, load_report_data, render_csv, render_scan_csv, render_svg, summary_json
from .transpiler import TranspileError, equivalent_up_to_layout, transpile

VALIDATION_ERRORS = (
    ContractError,
    ObservableParseError,
    ConfigurationError,
    CalibrationError,
    OptimizerConfigError,
    TranspileError,
    RunError,
    OSError,
    ValueError,
)

BUNDLED_TARGETS = ("marmot", "manila")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"{what} not found: {p}")
    return p


# ---------------------------------------------------------------------------
# subcommands


def cmd_ham(args) -> int:
    path = _require_file(args.observable, "observable file")
    t0 = time.perf_counter()
    obs = load_observable(path)
    energy = exact_ground_energy(obs)
    print(f"observable: {path}")
    print(f"qubits: {obs.n_qubits}")
    print(f"terms: {len(obs.terms)}")
    print(f"offset: {obs.offset:.6f} Ha")
    print(f"E_FCI: {energy:.6f} Ha")
    print(f"elapsed: {time.perf_counter() - t0:.3f} s")
    return 0


def cmd_transpile(args) -> int:
    targets = args.target or list(BUNDLED_TARGETS)
    ansatz = build_ry_cnot_ansatz(args.qubits)
    theta = np.random.default_rng(0).uniform(-np.pi, np.pi, ansatz.num_parameters)
    for i, spec in enumerate(targets):
        target = resolve_target(spec)
        circuit, report = transpile(ansatz, target)
        if i:
            print()
        print(f"target: {target.name}")
        for line in report.lines():
            print(line)
        if args.verify:
            dist = equivalent_up_to_layout(ansatz.bind(theta), circuit.bind(theta), report.final_layout)
            print(f"equivalence distance: {dist:.3e}")
    return 0


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "target": args.target,
        "seeds": args.seeds,
        "shots": args.shots,
        "iterations": args.iterations,
        "master_seed": args.seed_master,
        "optimizer": args.optimizer,
        "noise": args.noise,
        "workers": args.workers,
        "name": args.name,
        "observable": getattr(args, "observable", None),
    }
    if args.mitigate:
        overrides["mitigate"] = True
    if args.thermal:
        overrides["thermal"] = True
    if args.config:
        _require_file(args.config, "config file")
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _print_summary(summary: dict, exclude: int) -> None:
    fe, me, qt = summary["final_energy"], summary["minimum_energy"], summary["quantum_time_s"]
    print(f"runs: {summary['runs']} (excluded seeds: {summary['excluded_seeds'] or 'none'}; drop-worst {exclude})")
    if summary.get("reference_energy") is not None:
        print(f"E_FCI: {summary['reference_energy']:.6f} Ha")
    print(f"final energy: {fe['mean']:.6f} +- {fe['std']:.6f} Ha")
    print(f"minimum energy: {me['mean']:.6f} +- {me['std']:.6f} Ha")
    if "error_last4" in summary:
        e4, p4 = summary["error_last4"], summary["error_last4_pooled"]
        print(f"|E - E_FCI| last 4 iterations: {e4['mean']:.6f} +- {e4['std']:.6f} Ha (std across seeds)")
        print(f"|E - E_FCI| last 4 iterations: {p4['mean']:.6f} +- {p4['std']:.6f} Ha (std pooled)")
    print(f"quantum time per run: {qt['mean']:.6g} s")


def cmd_vqe(args) -> int:
    config = _config_from_args(args)
    records = run_vqe(config)
    out = Path(args.out) if args.out else Path("runs") / config.name
    report = transpile_report(config)
    extra = {"iteration_unit_note": "see iteration_unit", "config": config.snapshot()}
    if report is not None:
        extra["transpile"] = {
            "target": config.target,
            "depth": report.depth,
            "total_gates": report.total_gates,
            "two_qubit_gates": report.two_qubit_gates,
            "histogram": report.histogram,
        }
    write_records(records, out, extra)
    (out / "records.csv").write_text(render_csv(records))
    print(f"config hash: {config.digest()}")
    print(f"records: {out}")
    _print_summary(aggregate(records, exclude_worst=args.exclude_outliers), args.exclude_outliers)
    return 0


def cmd_scan(args) -> int:
    config = _config_from_args(args)
    table = load_scan_table(args.table)
    points = distance_scan(table, config)
    out = Path(args.out) if args.out else Path("runs") / f"{config.name}-scan"
    out.mkdir(parents=True, exist_ok=True)
    (out / "scan.csv").write_text(render_scan_csv(points))
    (out / "summary").write_text(summary_json({"config": config.snapshot(), "config_hash": config.digest()}) + "\n")
    print("distance_angstrom  vqe_minimum_ha  e_fci_ha")
    for p in points:
        print(f"{p.distance:.3f}  {p.vqe_minimum:.6f}  {p.exact:.6f}")
    print(f"scan: {out / 'scan.csv'}")
    return 0


def cmd_report(args) -> int:
    spec = ReportSpec(PlotKind(args.kind), tuple(args.runs), args.out, args.exclude_outliers, args.title)
    data = load_report_data(spec)
    svg = render_svg(spec, data)
    out = Path(args.out or f"{spec.kind.value}.svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"figure: {out}")
    if args.csv:
        records = [r for recs in data.runs.values() for r in recs]
        Path(args.csv).write_text(render_csv(records))
        print(f"csv: {args.csv}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config (TOML)")
    p.add_argument("--target", help="target description path or bundled name (marmot, manila)")
    p.add_argument("--seeds", type=int, help="number of parameter seeds")
    p.add_argument("--shots", type=int, help="shots per measurement group")
    p.add_argument("--iterations", type=int, help="optimizer iterations")
    p.add_argument("--optimizer", choices=("nft", "spsa", "nelder-mead"))
    p.add_argument("--noise", choices=("none", "full", "gates", "readout"))
    p.add_argument("--mitigate", action="store_true", help="apply readout-error mitigation")
    p.add_argument("--thermal", action="store_true", help="add thermal relaxation after each gate")
    p.add_argument("--exclude-outliers", type=int, default=0, metavar="K", help="drop the K worst seeds from statistics")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed-master", type=int, help="master RNG seed")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--name", help="run name (default directory runs/<name>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqebench", description="VQE hardware-model benchmark toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ham", help="diagonalize an observable file and print E_FCI")
    p.add_argument("observable", nargs="?", default=str(DEFAULT_OBSERVABLE))
    p.set_defaults(func=cmd_ham)

    p = sub.add_parser("transpile", help="transpile the RY-CNOT ansatz and print the report")
    p.add_argument("--target", action="append", help="target path or bundled name; repeatable")
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--verify", action="store_true", help="check unitary equivalence")
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser("vqe", help="run a VQE experiment")
    _add_run_flags(p)
    p.set_defaults(func=cmd_vqe)

    p = sub.add_parser("scan", help="run VQE over a table of interatomic distances")
    p.add_argument("--table", required=True, help="scan table (TOML with [[point]] entries)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report", help="render a figure from run directories")
    p.add_argument("kind", choices=[k.value for k in PlotKind])
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--out", help="SVG output path")
    p.add_argument("--csv", help="also write the records as CSV")
    p.add_argument("--exclude-outliers", type=int, default=0, metavar="K")
    p.add_argument("--title")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
