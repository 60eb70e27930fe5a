"""Ground truth by full state-vector evolution: joint and marginal distributions, partial traces.

Basis convention: particle 0 is the most significant bit of the state index.
Everything else in the package is checked against this module.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit

NORM_TOL = 1e-12
PROB_SUM_TOL = 1e-10

MAX_ORACLE_PARTICLES = 12


@dataclass(frozen=True)
class Distribution:
    """Probabilities over outcome tuples (ascending particle order within the subsystem)."""

    labels: tuple[tuple[int, ...], ...]
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.min() < -1e-12 or probs.max() > 1 + 1e-12:
            raise ValueError(f"probability outside [0, 1]: range {probs.min()}..{probs.max()}")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")

    def as_mapping(self) -> dict[str, float]:
        return {
            "".join(str(b) for b in label): float(p)
            for label, p in zip(self.labels, self.probabilities)
        }

    def __getitem__(self, outcome: tuple[int, ...] | int) -> float:
        if isinstance(outcome, int):
            outcome = (outcome,)
        return float(self.probabilities[self.labels.index(tuple(outcome))])


def _outcome_labels(count: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product((0, 1), repeat=count))


def _apply_layer(state: np.ndarray, circuit: Circuit, t: int) -> np.ndarray:
    layer = circuit.layer(t)
    n = circuit.particles
    for i, gate in enumerate(layer.singles):
        state = np.moveaxis(np.tensordot(gate, state, axes=([1], [i])), 0, i)
    for gate in layer.phases:
        a, b = gate.pair
        shape = [2 if k in (a, b) else 1 for k in range(n)]
        state = state * gate.diagonal().reshape(2, 2).reshape(shape)
    return state


def evolve(circuit: Circuit, upto: int | None = None, cap: int | None = None) -> np.ndarray:
    """State vector after layers 1..upto applied to |0...0> (upto=None means all layers).

    `cap` overrides the default particle ceiling (dense amplitudes grow as 2^N).
    """
    n = circuit.particles
    effective_cap = MAX_ORACLE_PARTICLES if cap is None else cap
    if n > effective_cap:
        raise ValueError(
            f"state-vector oracle capped at {effective_cap} particles; raise the cap to override"
        )
    t_stop = circuit.n if upto is None else upto
    if not 0 <= t_stop <= circuit.n:
        raise IndexError(f"layer index {t_stop} out of range 0..{circuit.n}")
    state = np.zeros((2,) * n, dtype=complex)
    state[(0,) * n] = 1.0
    for t in range(1, t_stop + 1):
        state = _apply_layer(state, circuit, t)
        norm = np.linalg.norm(state)
        if abs(norm - 1.0) > NORM_TOL:
            raise ArithmeticError(f"state norm drifted to {norm} after layer {t}")
    return state.reshape(-1)


def joint_distribution(circuit: Circuit) -> Distribution:
    """Born probabilities over all joint outcomes."""
    amplitudes = evolve(circuit)
    return Distribution(
        labels=_outcome_labels(circuit.particles),
        probabilities=np.abs(amplitudes) ** 2,
    )


def marginal_by_sum(circuit: Circuit, subsystem: tuple[int, ...] | list[int] | set[int]) -> Distribution:
    """Classical sum of joint probabilities over the external outcomes."""
    particles = sorted(set(subsystem))
    if not particles:
        raise ValueError("subsystem must be non-empty")
    if particles[0] < 0 or particles[-1] >= circuit.particles:
        raise ValueError(f"subsystem {particles} out of range for {circuit.particles} particles")
    probs = (np.abs(evolve(circuit)) ** 2).reshape((2,) * circuit.particles)
    external = tuple(i for i in range(circuit.particles) if i not in particles)
    if external:
        probs = probs.sum(axis=external)
    return Distribution(labels=_outcome_labels(len(particles)), probabilities=probs.reshape(-1))


def reduced_density(circuit: Circuit, particle: int, upto: int | None = None) -> np.ndarray:
    """Partial trace of |psi(t)><psi(t)| over every particle but one."""
    if not 0 <= particle < circuit.particles:
        raise IndexError(f"particle {particle} out of range")
    state = evolve(circuit, upto).reshape((2,) * circuit.particles)
    others = [i for i in range(circuit.particles) if i != particle]
    rho = np.tensordot(state, state.conj(), axes=(others, others))
    return rho
