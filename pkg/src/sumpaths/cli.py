"""Command line interface: marginals, traces, verification, demos, perturbation probes.

All results go to standard output as canonically serialized JSON (sorted
keys, repr floats), so identical inputs produce byte-identical reports;
diagnostics go to standard error. Exit codes: 0 success, 1 invariant or
assertion failure, 2 invalid input, 3 path budget exceeded.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path as FsPath

import numpy as np

from .circuits import (
    Circuit,
    CircuitError,
    build_epr_circuit,
    circuit_digest,
    load_circuit,
)
from .common import DEFAULT_BUDGET, BudgetExceeded, RealityError, check_budget
from .density import density_report
from .oracle import marginal_by_sum
from .paths import Path, amplitude_via_paths, enumerate_paths, path_amplitude
from .subsystems import (
    enumerate_config_paths,
    lambda_block,
    lambda_general_trajectory,
    normalize_subsystem,
    subsystem_distribution,
)
from .threeparticle import lambda3_tables, lambda_three
from .twoparticle import lambda_accumulate, lambda_tables
from .verify import DEFAULT_TOL, verify_circuit

REALITY_TOL = 1e-10


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _emit_csv(rows: list[tuple], header: tuple) -> None:
    sys.stdout.write(",".join(header) + "\n")
    for row in rows:
        sys.stdout.write(",".join(str(cell) for cell in row) + "\n")


def _c(value: complex) -> list[float]:
    return [float(value.real), float(value.imag)]


def _matrix(m: np.ndarray) -> list:
    return [[_c(cell) for cell in row] for row in np.asarray(m, dtype=complex)]


def _parse_subsystem(text: str, circuit: Circuit) -> tuple[int, ...]:
    try:
        indices = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise CircuitError(f"bad subsystem spec {text!r}") from None
    return normalize_subsystem(circuit, indices)


def _label(outcome: tuple[int, ...]) -> str:
    return "".join(str(b) for b in outcome)


def _lambda_distribution(circuit: Circuit, subsystem: tuple[int, ...], budget: int) -> dict[str, float]:
    if circuit.particles == 2 and subsystem == (0,):
        tables = lambda_tables(circuit, budget)
        return {str(j): tables.marginal(j) for j in (0, 1)}
    if circuit.particles == 3 and subsystem == (0,):
        tables = lambda3_tables(circuit, budget)
        return {str(j): tables.marginal(j) for j in (0, 1)}
    dist = subsystem_distribution(circuit, subsystem, budget)
    return dist.as_mapping()


def _pathsum_distribution(circuit: Circuit, subsystem: tuple[int, ...], budget: int) -> dict[str, float]:
    external = [i for i in range(circuit.particles) if i not in subsystem]
    probs: dict[str, float] = {}
    for outcome in itertools.product((0, 1), repeat=len(subsystem)):
        total = 0.0
        for ext_outcome in itertools.product((0, 1), repeat=len(external)):
            joint = [0] * circuit.particles
            for k, p in enumerate(subsystem):
                joint[p] = outcome[k]
            for k, p in enumerate(external):
                joint[p] = ext_outcome[k]
            total += abs(amplitude_via_paths(circuit, joint, budget)) ** 2
        probs[_label(outcome)] = total
    return probs


def cmd_marginal(args: argparse.Namespace) -> int:
    circuit = load_circuit(args.circuit)
    subsystem = _parse_subsystem(args.subsystem, circuit)
    if args.method == "oracle":
        probs = marginal_by_sum(circuit, subsystem).as_mapping()
    elif args.method == "pathsum":
        probs = _pathsum_distribution(circuit, subsystem, args.budget)
    else:
        probs = _lambda_distribution(circuit, subsystem, args.budget)
    if args.format == "csv":
        _emit_csv(
            [(label, repr(p)) for label, p in sorted(probs.items())],
            ("outcome", "probability"),
        )
        return 0
    _emit(
        {
            "schema": 1,
            "circuit": circuit_digest(circuit),
            "method": args.method,
            "subsystem": list(subsystem),
            "probabilities": probs,
        }
    )
    return 0


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise CircuitError(f"pair must be two comma-separated indices, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise CircuitError(f"bad pair spec {text!r}") from None


def _branch_json(terms) -> list[dict]:
    return [
        {
            "endpoint": term.endpoint,
            "left": term.left.bitstring(),
            "right": term.right.bitstring(),
            "delta": _c(term.delta),
            "gamma_sum": _c(term.gamma_sum),
            "chi_sum": _c(term.chi_sum),
            "value": _c(term.value),
        }
        for term in terms
    ]


def cmd_trace(args: argparse.Namespace) -> int:
    circuit = load_circuit(args.circuit)
    subsystem = _parse_subsystem(args.subsystem, circuit)
    endpoints = tuple(int(part) for part in str(args.endpoint).split(","))
    if len(endpoints) != len(subsystem):
        raise CircuitError("need one endpoint per subsystem particle")
    first, second = _parse_pair(args.pair)
    check_budget((1 << max(circuit.n - 1, 0)) ** len(subsystem), args.budget, "path enumeration")

    report: dict = {
        "schema": 1,
        "circuit": circuit_digest(circuit),
        "subsystem": list(subsystem),
        "endpoint": list(endpoints),
        "pair": [first, second],
    }
    if circuit.particles == 2 and subsystem == (0,):
        paths = enumerate_paths(circuit.n, endpoints[0])
        p, q = _select(paths, first), _select(paths, second)
        entry = lambda_accumulate(circuit, p, q)
        report["paths"] = [p.bitstring(), q.bitstring()]
        report["trajectory"] = [_c(v) for v in entry.trajectory]
        report["hits"] = [_c(v) for v in entry.hits]
    elif circuit.particles == 3 and subsystem == (0,):
        paths = enumerate_paths(circuit.n, endpoints[0])
        p, q = _select(paths, first), _select(paths, second)
        entry = lambda_three(circuit, p, q, args.budget)
        report["paths"] = [p.bitstring(), q.bitstring()]
        report["trajectory"] = [_c(v) for v in entry.trajectory]
        report["hits"] = [_c(b.total) for b in entry.breakdowns]
        report["breakdowns"] = [
            {
                "layer": b.layer,
                "total": _c(b.total),
                "ab_branch": _branch_json(b.ab_branch),
                "ac_branch": _branch_json(b.ac_branch),
            }
            for b in entry.breakdowns
        ]
    else:
        configs = enumerate_config_paths(circuit.n, endpoints)
        cfg_p, cfg_q = _select(configs, first), _select(configs, second)
        trajectory = lambda_general_trajectory(circuit, subsystem, cfg_p, cfg_q)
        report["paths"] = [list(cfg_p.bitstrings()), list(cfg_q.bitstrings())]
        report["trajectory"] = [_c(v) for v in trajectory]
        report["hits"] = [
            _c(trajectory[t] - trajectory[t - 1]) for t in range(1, len(trajectory))
        ]
    if args.format == "csv":
        rows = []
        for t, value in enumerate(report["trajectory"]):
            hit_value = [0.0, 0.0] if t == 0 else report["hits"][t - 1]
            rows.append((t, repr(value[0]), repr(value[1]), repr(hit_value[0]), repr(hit_value[1])))
        _emit_csv(rows, ("layer", "lambda_re", "lambda_im", "hit_re", "hit_im"))
        return 0
    _emit(report)
    return 0


def _select(items, index: int):
    if not 0 <= index < len(items):
        raise CircuitError(f"pair index {index} out of range 0..{len(items) - 1}")
    return items[index]


def _verify_one(circuit: Circuit, args: argparse.Namespace) -> dict:
    report = verify_circuit(circuit, tol=args.tol, budget=args.budget)
    return report.to_json(with_timings=args.timings)


def cmd_verify(args: argparse.Namespace) -> int:
    if (args.circuit is None) == (args.manifest is None):
        raise CircuitError("verify needs exactly one of --circuit or --manifest")
    if args.circuit is not None:
        report = _verify_one(load_circuit(args.circuit), args)
        if args.format == "csv":
            _emit_csv(
                [
                    (c["name"], repr(c["max_error"]), repr(c["tolerance"]), c["pass"])
                    for c in report["checks"]
                ],
                ("check", "max_error", "tolerance", "pass"),
            )
        else:
            _emit(report)
        return 0 if report["pass"] else 1

    manifest_path = FsPath(args.manifest)
    with open(manifest_path, encoding="utf-8") as handle:
        manifest = json.load(handle)
    reports = []
    for entry in manifest["circuits"]:
        circuit = load_circuit(str(manifest_path.parent / entry["file"]))
        report = _verify_one(circuit, args)
        report["file"] = entry["file"]
        reports.append(report)
    overall = all(r["pass"] for r in reports)
    _emit({"schema": 1, "pass": overall, "circuits": reports})
    return 0 if overall else 1


def _parse_gate_spec(text: str) -> np.ndarray:
    """A rotation angle in radians, or an explicit 2x2 matrix of [re, im] pairs."""
    try:
        angle = float(text)
        return np.array(
            [[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]],
            dtype=complex,
        )
    except ValueError:
        pass
    try:
        entries = json.loads(text)
    except json.JSONDecodeError:
        raise CircuitError(f"gate spec {text!r} is neither an angle nor a JSON matrix") from None
    return np.array([[complex(re, im) for re, im in row] for row in entries])


def cmd_epr(args: argparse.Namespace) -> int:
    a2 = _parse_gate_spec(args.a2)
    b2 = _parse_gate_spec(args.b2)
    circuit = build_epr_circuit(a2, b2)
    oracle = marginal_by_sum(circuit, {0}).as_mapping()
    pathsum = _pathsum_distribution(circuit, (0,), args.budget)
    tables = lambda_tables(circuit, args.budget)
    lam_probs = {str(j): tables.marginal(j) for j in (0, 1)}
    cross = lambda_accumulate(circuit, Path((0, 0)), Path((1, 0)))

    max_marginal_error = max(
        abs(probs[key] - 0.5)
        for probs in (oracle, pathsum, lam_probs)
        for key in ("0", "1")
    )
    hit_error = max(abs(cross.hits[0] + 1.0), abs(cross.hits[1]))
    passed = (
        max_marginal_error < 1e-10 and abs(cross.final) < 1e-12 and hit_error < 1e-12
    )
    if args.format == "csv":
        rows = [
            (method, outcome, repr(probs[outcome]))
            for method, probs in (("oracle", oracle), ("pathsum", pathsum), ("lambda", lam_probs))
            for outcome in ("0", "1")
        ]
        _emit_csv(rows, ("method", "outcome", "probability"))
        return 0 if passed else 1
    _emit(
        {
            "schema": 1,
            "circuit": circuit_digest(circuit),
            "marginals": {"oracle": oracle, "pathsum": pathsum, "lambda": lam_probs},
            "cross_pair_lambda": _c(cross.final),
            "cross_pair_hits": [_c(v) for v in cross.hits],
            "max_marginal_error": max_marginal_error,
            "pass": passed,
        }
    )
    return 0 if passed else 1


def _clamped_block(amps: np.ndarray, lam: np.ndarray, clamp: float) -> float:
    magnitude = np.abs(lam)
    scale = np.ones_like(magnitude)
    over = magnitude > clamp
    scale[over] = clamp / magnitude[over]
    weights = lam * scale
    np.fill_diagonal(weights, 0.0)
    total = float(np.sum(np.abs(amps) ** 2)) + complex(amps.conj() @ weights @ amps)
    if abs(total.imag) > REALITY_TOL:
        raise RealityError(f"clamped pair sum has imaginary residue {total.imag:.3e}")
    return total.real


def cmd_perturb(args: argparse.Namespace) -> int:
    if args.clamp < 0:
        raise CircuitError("clamp must be non-negative")
    circuit = load_circuit(args.circuit)
    subsystem = _parse_subsystem(args.subsystem, circuit)
    oracle = marginal_by_sum(circuit, subsystem).as_mapping()

    raw: dict[str, float] = {}
    if circuit.particles == 2 and subsystem == (0,):
        tables = lambda_tables(circuit, args.budget)
        for j in (0, 1):
            rows = tables.endpoint_rows(j)
            raw[str(j)] = _clamped_block(tables.amps[rows], tables.lambda_final(j), args.clamp)
    elif circuit.particles == 3 and subsystem == (0,):
        tables = lambda3_tables(circuit, args.budget)
        for j in (0, 1):
            rows = tables.endpoint_rows(j)
            raw[str(j)] = _clamped_block(tables.amps[rows], tables.lambda_final(j), args.clamp)
    else:
        for outcome in itertools.product((0, 1), repeat=len(subsystem)):
            block = lambda_block(circuit, subsystem, outcome, args.budget)
            raw[_label(outcome)] = _clamped_block(block.amplitudes, block.lam, args.clamp)

    raw_total = sum(raw.values())
    probabilities = {key: value / raw_total for key, value in raw.items()}
    deviations = {key: probabilities[key] - oracle[key] for key in raw}
    if args.format == "csv":
        _emit_csv(
            [
                (key, repr(raw[key]), repr(probabilities[key]), repr(oracle[key]), repr(deviations[key]))
                for key in sorted(raw)
            ],
            ("outcome", "raw", "probability", "oracle", "deviation"),
        )
        return 0
    _emit(
        {
            "schema": 1,
            "circuit": circuit_digest(circuit),
            "subsystem": list(subsystem),
            "clamp": args.clamp,
            "raw": raw,
            "raw_total": raw_total,
            "probabilities": probabilities,
            "oracle": oracle,
            "deviation": deviations,
            "max_deviation": max(abs(v) for v in deviations.values()),
        }
    )
    return 0


def cmd_paths(args: argparse.Namespace) -> int:
    circuit = load_circuit(args.circuit)
    if not 0 <= args.particle < circuit.particles:
        raise CircuitError(f"particle {args.particle} out of range")
    if args.endpoint not in (0, 1):
        raise CircuitError("endpoint must be 0 or 1")
    rows = []
    for index, path in enumerate(enumerate_paths(circuit.n, args.endpoint)):
        rows.append((index, path, path_amplitude(circuit, args.particle, path)))
    if args.format == "csv":
        _emit_csv(
            [(i, p.bitstring(), repr(float(a.real)), repr(float(a.imag))) for i, p, a in rows],
            ("index", "modes", "re", "im"),
        )
        return 0
    _emit(
        {
            "schema": 1,
            "circuit": circuit_digest(circuit),
            "particle": args.particle,
            "endpoint": args.endpoint,
            "paths": [
                {"index": i, "modes": p.bitstring(), "amplitude": _c(a)} for i, p, a in rows
            ],
        }
    )
    return 0


def cmd_density(args: argparse.Namespace) -> int:
    circuit = load_circuit(args.circuit)
    records = density_report(circuit)
    if args.format == "csv":
        _emit_csv(
            [
                (r["layer"], repr(r["frobenius_error"]), repr(r["hit_diagonal_max"]),
                 repr(r["offdiagonal_error"]), repr(r["pathsum_error"]))
                for r in records
            ],
            ("t", "frobeniusError", "hitDiagonalMax", "offdiagonalError", "pathsumError"),
        )
        return 0
    _emit(
        {
            "schema": 1,
            "circuit": circuit_digest(circuit),
            "layers": [
                {
                    "t": r["layer"],
                    "miss": _matrix(r["miss"]),
                    "hit": _matrix(r["hit"]),
                    "sum": _matrix(r["total"]),
                    "oracle": _matrix(r["oracle"]),
                    "frobeniusError": r["frobenius_error"],
                }
                for r in records
            ],
        }
    )
    return 0


def _add_common(parser: argparse.ArgumentParser, circuit: bool = True) -> None:
    if circuit:
        parser.add_argument("--circuit", required=True, help="circuit JSON file")
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="path budget")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument(
        "--oracle-cap",
        type=int,
        default=None,
        help="override the state-vector oracle's particle ceiling (default 12)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sumpaths",
        description="Subsystem marginals by state vector, raw path sums, and the "
        "hidden-variable decomposition, with cross-method verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("marginal", help="subsystem marginal distribution")
    _add_common(p)
    p.add_argument("--subsystem", default="0", help="comma-separated particle indices")
    p.add_argument("--method", choices=("oracle", "pathsum", "lambda"), default="lambda")
    p.set_defaults(func=cmd_marginal)

    p = sub.add_parser("trace", help="hidden-variable trajectory for one path pair")
    _add_common(p)
    p.add_argument("--subsystem", default="0")
    p.add_argument("--endpoint", default="0", help="endpoint mode(s), comma-separated")
    p.add_argument("--pair", required=True, help="two lexicographic path indices, e.g. 0,1")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--circuit", help="circuit JSON file")
    p.add_argument("--manifest", help="corpus manifest JSON file")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--oracle-cap", type=int, default=None)
    p.add_argument(
        "--timings",
        action="store_true",
        help="include per-check timings (reports are no longer byte-stable)",
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("epr", help="EPR-B demo: uniform marginals, vanished interference")
    p.add_argument("--a2", default="0.0", help="rotation angle or 2x2 [re,im] matrix JSON")
    p.add_argument("--b2", default="0.0", help="rotation angle or 2x2 [re,im] matrix JSON")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_epr)

    p = sub.add_parser("perturb", help="clamp hidden-variable magnitudes and compare")
    _add_common(p)
    p.add_argument("--subsystem", default="0")
    p.add_argument("--clamp", type=float, required=True, help="magnitude ceiling c >= 0")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("paths", help="dump enumerated paths with amplitudes")
    _add_common(p)
    p.add_argument("--particle", type=int, required=True)
    p.add_argument("--endpoint", type=int, required=True)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("density", help="per-layer reduced-density hit/miss split")
    _add_common(p)
    p.set_defaults(func=cmd_density)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "oracle_cap", None):
        from . import oracle

        oracle.MAX_ORACLE_PARTICLES = args.oracle_cap
    try:
        return args.func(args)
    except BudgetExceeded as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except RealityError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (CircuitError, OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
