"""Reduced-density recursion for two-particle circuits: the hit/miss split.

Each layer's update of the subsystem density matrix splits into the
interaction-free rotation of the previous reduced state (miss) and a purely
off-diagonal correction (hit) that restores the exact partial trace. The
split assumes the layer's phase gate is in core form diag(1, 1, 1, e^{i phi});
`normalized_phase_form` rewrites any circuit into that form by absorbing the
local factors into the layer's singles and dropping the global phase, which
leaves every density matrix unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, PhaseGate, factor_phase_gate, make_circuit
from .common import DEFAULT_BUDGET, check_budget
from .oracle import evolve, reduced_density
from .paths import enumerate_paths


class PhaseGateNotNormalized(ValueError):
    """Layer's phase gate is not in core form; run normalized_phase_form first."""


def _require_two_particles(circuit: Circuit) -> None:
    if circuit.particles != 2:
        raise ValueError("density decomposition handles 2-particle circuits")


def normalized_phase_form(circuit: Circuit) -> Circuit:
    """Equivalent circuit whose phase gates are all diag(1, 1, 1, e^{i phi}).

    Local Z factors move into the layer's singles; the global phase is
    dropped (it cancels in every density matrix).
    """
    _require_two_particles(circuit)
    specs = []
    for layer in circuit.layers:
        gate = layer.phase_on((0, 1))
        if gate is None:
            specs.append((dict(enumerate(layer.singles)), []))
            continue
        f = factor_phase_gate(gate)
        singles = {
            0: np.diag([1.0, np.exp(1j * f.local_first)]) @ layer.singles[0],
            1: np.diag([1.0, np.exp(1j * f.local_second)]) @ layer.singles[1],
        }
        specs.append((singles, [PhaseGate((0, 1), (0.0, 0.0, 0.0, f.residual))]))
    return make_circuit(2, specs)


def _core_angle(circuit: Circuit, t: int) -> float | None:
    """Residual angle phi of the layer-t gate, or None when no gate is present."""
    gate = circuit.phase(t, (0, 1))
    if gate is None:
        return None
    if gate.thetas[:3] != (0.0, 0.0, 0.0):
        raise PhaseGateNotNormalized(
            f"layer {t} gate has angles {gate.thetas}; expected (0, 0, 0, phi)"
        )
    return gate.thetas[3]


@dataclass(frozen=True)
class DensityPair:
    """Hit/miss split of the subsystem reduced density matrix at one layer."""

    layer: int
    miss: np.ndarray
    hit: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.miss + self.hit


def density_step(circuit: Circuit, t: int, prev_joint: np.ndarray) -> DensityPair:
    """One recursion step from the full two-particle density matrix at layer t-1."""
    _require_two_particles(circuit)
    phi = _core_angle(circuit, t)
    gate_a, gate_b = circuit.single(t, 0), circuit.single(t, 1)
    prev_joint = np.asarray(prev_joint, dtype=complex).reshape(4, 4)

    rho_prev = prev_joint.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)
    miss = gate_a @ rho_prev @ gate_a.conj().T

    if phi is None:
        return DensityPair(layer=t, miss=miss, hit=np.zeros((2, 2), dtype=complex))
    singles = np.kron(gate_a, gate_b)
    evolved = singles @ prev_joint @ singles.conj().T
    block = evolved.reshape(2, 2, 2, 2)[:, 1, :, 1]  # <1|_B ... |1>_B, indices (a, a')
    z_phi = np.array([1.0, np.exp(1j * phi)])
    hit = z_phi[:, None] * block * z_phi.conj()[None, :] - block
    return DensityPair(layer=t, miss=miss, hit=hit)


def hit_offdiagonal(circuit: Circuit, t: int, prev_joint: np.ndarray) -> np.ndarray:
    """Independent off-diagonal formula for the hit term (diagonal cancels exactly)."""
    _require_two_particles(circuit)
    phi = _core_angle(circuit, t)
    if phi is None:
        return np.zeros((2, 2), dtype=complex)
    singles = np.kron(circuit.single(t, 0), circuit.single(t, 1))
    evolved = singles @ np.asarray(prev_joint, dtype=complex).reshape(4, 4) @ singles.conj().T
    out = np.zeros((2, 2), dtype=complex)
    out[0, 1] = (np.exp(-1j * phi) - 1.0) * evolved[1, 3]  # <01|...|11>
    out[1, 0] = (np.exp(1j * phi) - 1.0) * evolved[3, 1]  # <11|...|01>
    return out


def hit_pathsum_amplitude(circuit: Circuit, t: int, budget: int = DEFAULT_BUDGET) -> complex:
    """The collapse amplitude <01| singles |psi(t-1)> rebuilt as a subsystem path sum.

    Each subsystem path to mode 0 carries its bare amplitude times the
    conditioned external transition <1|B^(t) B_P^(t-1)|0>.
    """
    _require_two_particles(circuit)
    _core_angle(circuit, t)
    check_budget(1 << max(t - 1, 0), budget, "subsystem paths")
    total = 0j
    for path in enumerate_paths(t, 0):
        amp = 1.0 + 0j
        for s in range(1, t + 1):
            amp *= circuit.single(s, 0)[path.mode(s), path.mode(s - 1)]
        state = np.array([1.0, 0.0], dtype=complex)
        for s in range(1, t):
            state = circuit.single(s, 1) @ state
            gate = circuit.phase(s, (0, 1))
            if gate is not None:
                thetas = np.asarray(gate.thetas).reshape(2, 2)
                state = np.exp(1j * thetas[path.mode(s)]) * state
        state = circuit.single(t, 1) @ state
        total += amp * state[1]
    return complex(total)


def collapse_amplitude_direct(circuit: Circuit, t: int) -> complex:
    """<01| (A^(t) x B^(t)) |psi(t-1)>, straight from the state vector."""
    _require_two_particles(circuit)
    singles = np.kron(circuit.single(t, 0), circuit.single(t, 1))
    return complex((singles @ evolve(circuit, t - 1))[1])


def density_report(circuit: Circuit) -> list[dict]:
    """Per-layer records of the recursion for the CLI: errors against the oracle."""
    normalized = normalized_phase_form(circuit)
    records = []
    for t in range(1, normalized.n + 1):
        psi = evolve(normalized, t - 1)
        prev_joint = np.outer(psi, psi.conj())
        pair = density_step(normalized, t, prev_joint)
        oracle = reduced_density(normalized, 0, t)
        off = hit_offdiagonal(normalized, t, prev_joint)
        pathsum = hit_pathsum_amplitude(normalized, t)
        direct = collapse_amplitude_direct(normalized, t)
        records.append(
            {
                "layer": t,
                "miss": pair.miss,
                "hit": pair.hit,
                "total": pair.total,
                "oracle": oracle,
                "frobenius_error": float(np.linalg.norm(pair.total - oracle)),
                "hit_diagonal_max": float(np.max(np.abs(np.diag(pair.hit)))),
                "offdiagonal_error": float(np.max(np.abs(off - pair.hit))),
                "pathsum_amplitude": pathsum,
                "pathsum_error": abs(pathsum - direct),
            }
        )
    return records
