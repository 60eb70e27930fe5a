"""Layered normal-form circuits: single-particle gates plus diagonal controlled-phase gates.

Every circuit acts on qubits prepared in |0...0> and is a sequence of layers.
Within a layer the single-particle gates act first (as a tensor product),
followed by the diagonal controlled-phase gates; since all phase gates are
diagonal they commute with each other, so their relative order only matters
for hit bookkeeping, never for the physics.

The JSON file format is strict: unknown keys are rejected, complex entries
are [re, im] pairs, and particles absent from a layer's "singles" get the
identity.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

import numpy as np

UNITARITY_TOL = 1e-12

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
IDENTITY = np.eye(2, dtype=complex)


class CircuitError(ValueError):
    """Base class for circuit construction and validation failures."""


class CircuitFormatError(CircuitError):
    """Malformed circuit description (unknown keys, wrong shapes, non-finite numbers)."""


class NonUnitaryGate(CircuitError):
    """A single-particle gate deviates from unitarity beyond tolerance."""


class DuplicatePhasePair(CircuitError):
    """Two phase gates on the same particle pair within one layer."""


class BadParticleIndex(CircuitError):
    """A particle index is out of range or a pair is not strictly increasing."""


def _freeze(matrix: np.ndarray) -> np.ndarray:
    out = np.array(matrix, dtype=complex)
    out.flags.writeable = False
    return out


_IDENTITY_FROZEN = _freeze(IDENTITY)


@dataclass(frozen=True, eq=False)
class PhaseGate:
    """Diagonal two-particle gate: joint mode (ma, mb) acquires phase e^{i theta}."""

    pair: tuple[int, int]
    thetas: tuple[float, float, float, float]  # joint modes (0,0),(0,1),(1,0),(1,1)

    def theta(self, mode_first: int, mode_second: int) -> float:
        return self.thetas[2 * mode_first + mode_second]

    def diagonal(self) -> np.ndarray:
        """Length-4 diagonal of the induced two-particle operator."""
        return np.exp(1j * np.asarray(self.thetas))


@dataclass(frozen=True, eq=False)
class Layer:
    """One circuit layer: a single gate per particle, then diagonal phase gates."""

    singles: tuple[np.ndarray, ...]
    phases: tuple[PhaseGate, ...]

    def phase_on(self, pair: tuple[int, int]) -> PhaseGate | None:
        for gate in self.phases:
            if gate.pair == pair:
                return gate
        return None


@dataclass(frozen=True, eq=False)
class Circuit:
    """Validated layered circuit on `particles` qubits, initial state |0...0>."""

    particles: int
    layers: tuple[Layer, ...]

    @property
    def n(self) -> int:
        return len(self.layers)

    def layer(self, t: int) -> Layer:
        """Layer at 1-based position t."""
        if not 1 <= t <= self.n:
            raise IndexError(f"layer {t} out of range 1..{self.n}")
        return self.layers[t - 1]

    def single(self, t: int, particle: int) -> np.ndarray:
        return self.layer(t).singles[particle]

    def phase(self, t: int, pair: tuple[int, int]) -> PhaseGate | None:
        return self.layer(t).phase_on(pair)

    def pairs_with_phase(self) -> set[tuple[int, int]]:
        return {g.pair for layer in self.layers for g in layer.phases}


def unitarity_defect(matrix: np.ndarray) -> float:
    """Max absolute entry of U^dag U - I."""
    matrix = np.asarray(matrix, dtype=complex)
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def _check_single(matrix: Any, where: str) -> np.ndarray:
    arr = np.asarray(matrix, dtype=complex)
    if arr.shape != (2, 2):
        raise CircuitFormatError(f"{where}: single gate must be 2x2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(float))):
        raise CircuitFormatError(f"{where}: non-finite gate entry")
    defect = unitarity_defect(arr)
    if defect > UNITARITY_TOL:
        raise NonUnitaryGate(f"{where}: unitarity defect {defect:.3e} exceeds {UNITARITY_TOL}")
    return _freeze(arr)


def _parse_complex_matrix(entries: Any, where: str) -> np.ndarray:
    if (
        not isinstance(entries, list)
        or len(entries) != 2
        or any(not isinstance(row, list) or len(row) != 2 for row in entries)
    ):
        raise CircuitFormatError(f"{where}: expected a 2x2 matrix of [re, im] pairs")
    out = np.empty((2, 2), dtype=complex)
    for i, row in enumerate(entries):
        for j, cell in enumerate(row):
            if not isinstance(cell, list) or len(cell) != 2:
                raise CircuitFormatError(f"{where}[{i}][{j}]: expected [re, im]")
            re, im = cell
            if not isinstance(re, (int, float)) or not isinstance(im, (int, float)):
                raise CircuitFormatError(f"{where}[{i}][{j}]: entries must be numbers")
            out[i, j] = complex(re, im)
    return out


def _parse_phase(raw: Any, particles: int, where: str) -> PhaseGate:
    if not isinstance(raw, dict):
        raise CircuitFormatError(f"{where}: phase gate must be an object")
    unknown = set(raw) - {"pair", "theta"}
    if unknown:
        raise CircuitFormatError(f"{where}: unknown keys {sorted(unknown)}")
    pair = raw.get("pair")
    theta = raw.get("theta")
    if not isinstance(pair, list) or len(pair) != 2 or not all(isinstance(x, int) for x in pair):
        raise CircuitFormatError(f"{where}: 'pair' must be two particle indices")
    a, b = pair
    if not (0 <= a < particles and 0 <= b < particles):
        raise BadParticleIndex(f"{where}: pair {pair} out of range for {particles} particles")
    if a >= b:
        raise BadParticleIndex(f"{where}: pair must be strictly increasing, got {pair}")
    if not isinstance(theta, list) or len(theta) != 4:
        raise CircuitFormatError(f"{where}: 'theta' must be four angles")
    angles = []
    for k, value in enumerate(theta):
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise CircuitFormatError(f"{where}: theta[{k}] must be a finite number")
        angles.append(float(value))
    return PhaseGate(pair=(a, b), thetas=tuple(angles))


def validate_circuit(raw: Mapping[str, Any]) -> Circuit:
    """Validate a parsed circuit description and return an immutable Circuit."""
    if not isinstance(raw, Mapping):
        raise CircuitFormatError("circuit description must be an object")
    unknown = set(raw) - {"particles", "layers"}
    if unknown:
        raise CircuitFormatError(f"unknown top-level keys {sorted(unknown)}")
    particles = raw.get("particles")
    if not isinstance(particles, int) or particles < 1:
        raise CircuitFormatError("'particles' must be a positive integer")
    raw_layers = raw.get("layers")
    if not isinstance(raw_layers, list):
        raise CircuitFormatError("'layers' must be a list")

    layers = []
    for t, raw_layer in enumerate(raw_layers, start=1):
        where = f"layer {t}"
        if not isinstance(raw_layer, dict):
            raise CircuitFormatError(f"{where}: must be an object")
        unknown = set(raw_layer) - {"singles", "phases"}
        if unknown:
            raise CircuitFormatError(f"{where}: unknown keys {sorted(unknown)}")

        singles: list[np.ndarray] = [_IDENTITY_FROZEN] * particles
        raw_singles = raw_layer.get("singles", {})
        if not isinstance(raw_singles, dict):
            raise CircuitFormatError(f"{where}: 'singles' must map particle index to matrix")
        for key, entries in raw_singles.items():
            try:
                idx = int(key)
            except (TypeError, ValueError):
                raise CircuitFormatError(f"{where}: singles key {key!r} is not an index") from None
            if not 0 <= idx < particles:
                raise BadParticleIndex(f"{where}: singles index {idx} out of range")
            matrix = _parse_complex_matrix(entries, f"{where} singles[{idx}]")
            singles[idx] = _check_single(matrix, f"{where} singles[{idx}]")

        phases: list[PhaseGate] = []
        seen_pairs: set[tuple[int, int]] = set()
        for k, raw_phase in enumerate(raw_layer.get("phases", [])):
            gate = _parse_phase(raw_phase, particles, f"{where} phases[{k}]")
            if gate.pair in seen_pairs:
                raise DuplicatePhasePair(f"{where}: duplicate phase gate on pair {gate.pair}")
            seen_pairs.add(gate.pair)
            phases.append(gate)
        phases.sort(key=lambda g: g.pair)
        layers.append(Layer(singles=tuple(singles), phases=tuple(phases)))

    return Circuit(particles=particles, layers=tuple(layers))


def make_circuit(
    particles: int,
    layers: Iterator[tuple[Mapping[int, np.ndarray], list[PhaseGate]]] | list,
) -> Circuit:
    """Build a Circuit from in-memory gates: [(singles_by_index, [PhaseGate, ...]), ...]."""
    built = []
    for t, (singles_map, phases) in enumerate(layers, start=1):
        singles: list[np.ndarray] = [_IDENTITY_FROZEN] * particles
        for idx, matrix in singles_map.items():
            if not 0 <= idx < particles:
                raise BadParticleIndex(f"layer {t}: singles index {idx} out of range")
            singles[idx] = _check_single(matrix, f"layer {t} singles[{idx}]")
        seen: set[tuple[int, int]] = set()
        for gate in phases:
            a, b = gate.pair
            if not (0 <= a < b < particles):
                raise BadParticleIndex(f"layer {t}: bad phase pair {gate.pair}")
            if gate.pair in seen:
                raise DuplicatePhasePair(f"layer {t}: duplicate phase gate on pair {gate.pair}")
            seen.add(gate.pair)
        built.append(
            Layer(singles=tuple(singles), phases=tuple(sorted(phases, key=lambda g: g.pair)))
        )
    return Circuit(particles=particles, layers=tuple(built))


def condition_phase_gate(gate: PhaseGate, controller: int, mode: int) -> np.ndarray:
    """Fix one member of the pair to `mode`; returns the 2x2 diagonal gate on the other."""
    return np.diag(conditioned_diagonal(gate, controller, mode))


def conditioned_diagonal(gate: PhaseGate, controller: int, mode: int) -> np.ndarray:
    """Length-2 diagonal of condition_phase_gate (the fast-path form)."""
    if mode not in (0, 1):
        raise ValueError(f"mode must be 0 or 1, got {mode}")
    if controller == gate.pair[0]:
        angles = (gate.theta(mode, 0), gate.theta(mode, 1))
    elif controller == gate.pair[1]:
        angles = (gate.theta(0, mode), gate.theta(1, mode))
    else:
        raise BadParticleIndex(f"controller {controller} not in pair {gate.pair}")
    return np.exp(1j * np.asarray(angles))


@dataclass(frozen=True)
class PhaseFactorization:
    """diag(e^{i t1..t4}) = global * (Z_local_first x Z_local_second) * CZ_residual."""

    global_phase: complex
    local_first: float
    local_second: float
    residual: float


def factor_phase_gate(gate: PhaseGate) -> PhaseFactorization:
    """Split a 4-angle phase gate into a global phase, two local Z rotations and a CZ core."""
    t1, t2, t3, t4 = gate.thetas
    return PhaseFactorization(
        global_phase=complex(np.exp(1j * t1)),
        local_first=t3 - t1,
        local_second=t2 - t1,
        residual=t1 + t4 - t2 - t3,
    )


def build_epr_circuit(a2: np.ndarray, b2: np.ndarray) -> Circuit:
    """Bell-state preparation followed by local measurement rotations a2, b2."""
    bell_phase = PhaseGate(pair=(0, 1), thetas=(0.0, 0.0, 0.0, math.pi))
    return make_circuit(
        2,
        [
            ({0: HADAMARD, 1: HADAMARD}, [bell_phase]),
            ({0: a2, 1: b2}, []),
        ],
    )


def _entry_list(matrix: np.ndarray) -> list:
    return [[[float(cell.real), float(cell.imag)] for cell in row] for row in matrix]


def circuit_to_raw(circuit: Circuit) -> dict:
    """Canonical JSON-ready description; identity singles are omitted."""
    layers = []
    for layer in circuit.layers:
        entry: dict[str, Any] = {}
        singles = {
            str(i): _entry_list(gate)
            for i, gate in enumerate(layer.singles)
            if not np.array_equal(gate, IDENTITY)
        }
        if singles:
            entry["singles"] = singles
        if layer.phases:
            entry["phases"] = [
                {"pair": list(g.pair), "theta": list(g.thetas)} for g in layer.phases
            ]
        layers.append(entry)
    return {"particles": circuit.particles, "layers": layers}


def dumps_canonical(circuit: Circuit) -> str:
    return json.dumps(circuit_to_raw(circuit), sort_keys=True, indent=2) + "\n"


def circuit_digest(circuit: Circuit) -> str:
    """Content hash of the canonical serialization."""
    return hashlib.sha256(dumps_canonical(circuit).encode()).hexdigest()


def load_circuit(path: str) -> Circuit:
    with open(path, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as err:
            raise CircuitFormatError(f"{path}: invalid JSON ({err})") from None
    return validate_circuit(raw)


def save_circuit(circuit: Circuit, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps_canonical(circuit))
