"""General subsystem marginals: cross-module agreement and oracle equivalence."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from sumpaths.circuits import PhaseGate, build_epr_circuit, make_circuit
from sumpaths.common import BudgetExceeded
from sumpaths.corpus import random_circuit, random_single
from sumpaths.oracle import marginal_by_sum
from sumpaths.paths import Path, enumerate_paths, path_amplitude
from sumpaths.subsystems import (
    ConfigPath,
    config_path_amplitude,
    enumerate_config_paths,
    lambda_block,
    lambda_general,
    lambda_general_trajectory,
    marginal_general,
    subsystem_distribution,
)
from sumpaths.threeparticle import lambda_three
from sumpaths.twoparticle import lambda_accumulate, marginal_lambda


def test_single_particle_config_amplitude_reduces_to_path_amplitude():
    circuit = random_circuit(np.random.default_rng(3), 3, 3)
    for path in enumerate_paths(3, 1):
        cfg = ConfigPath(paths=(path,))
        assert config_path_amplitude(circuit, (0,), cfg) == path_amplitude(circuit, 0, path)


def test_epr_pair_config_amplitude_carries_interaction_phase():
    from sumpaths.circuits import HADAMARD

    # both subsystem paths sit at mode 1, so the intra-subsystem gate
    # contributes its -1 phase to the configuration amplitude
    circuit = make_circuit(
        3, [({0: HADAMARD, 1: HADAMARD}, [PhaseGate((0, 1), (0.0, 0.0, 0.0, np.pi))])]
    )
    cfg = ConfigPath(paths=(Path((1,)), Path((1,))))
    value = config_path_amplitude(circuit, (0, 1), cfg)
    assert abs(value - (-0.5)) < 1e-12


def test_lambda_general_identity_cases():
    circuit = random_circuit(np.random.default_rng(5), 3, 3)
    cfg = ConfigPath(paths=(enumerate_paths(3, 0)[2],))
    assert abs(lambda_general(circuit, (0,), cfg, cfg) - 1.0) < 1e-12


def test_lambda_general_is_one_when_decoupled():
    rng = np.random.default_rng(7)
    specs = [({i: random_single(rng) for i in range(3)}, []) for _ in range(3)]
    circuit = make_circuit(3, specs)
    paths = enumerate_paths(3, 0)
    for p, q in itertools.combinations(paths, 2):
        value = lambda_general(circuit, (0,), ConfigPath((p,)), ConfigPath((q,)))
        assert value == 1.0 + 0j


def test_lambda_general_matches_two_particle_module():
    circuit = random_circuit(np.random.default_rng(11), 2, 4)
    paths = enumerate_paths(4, 1)
    for p, q in itertools.permutations(paths[:4], 2):
        general = lambda_general(circuit, (0,), ConfigPath((p,)), ConfigPath((q,)))
        assert abs(general - lambda_accumulate(circuit, p, q).final) < 1e-10
    for j in (0, 1):
        assert abs(marginal_general(circuit, (0,), (j,)) - marginal_lambda(circuit, j)) < 1e-12


def test_lambda_general_matches_three_particle_module():
    circuit = random_circuit(np.random.default_rng(13), 3, 3)
    paths = enumerate_paths(3, 0)
    for p, q in itertools.permutations(paths[:3], 2):
        general = lambda_general(circuit, (0,), ConfigPath((p,)), ConfigPath((q,)))
        assert abs(general - lambda_three(circuit, p, q).final) < 1e-10


def test_trajectory_increments_are_exact_zeros_off_interaction_layers():
    rng = np.random.default_rng(17)
    circuit = make_circuit(
        4,
        [
            ({i: random_single(rng) for i in range(4)}, [PhaseGate((2, 3), (0.1, 0.5, 0.2, 0.9))]),
            ({}, [PhaseGate((0, 2), tuple(rng.uniform(0, 2 * np.pi, 4)))]),
            ({i: random_single(rng) for i in range(4)}, [PhaseGate((0, 1), tuple(rng.uniform(0, 2 * np.pi, 4)))]),
        ],
    )
    subsystem = (0, 1)
    cfgs = enumerate_config_paths(3, (0, 1))
    trajectory = lambda_general_trajectory(circuit, subsystem, cfgs[0], cfgs[3])
    # layer 1 only couples external particles (2,3); layer 3's (0,1) gate is intra-subsystem
    assert trajectory[1] == trajectory[0]
    assert trajectory[3] == trajectory[2]
    assert trajectory[2] != trajectory[1]


def test_endpoint_mismatch_rejected():
    circuit = random_circuit(np.random.default_rng(19), 3, 2)
    p = ConfigPath((Path((0, 0)),))
    q = ConfigPath((Path((0, 1)),))
    with pytest.raises(ValueError):
        lambda_general(circuit, (0,), p, q)


def test_product_circuit_pair_marginal_is_product_of_born_rules():
    rng = np.random.default_rng(23)
    gates = [random_single(rng) for _ in range(3)]
    circuit = make_circuit(3, [({i: gates[i] for i in range(3)}, [])])
    for outcome in itertools.product((0, 1), repeat=2):
        expected = abs(gates[0][outcome[0], 0]) ** 2 * abs(gates[1][outcome[1], 0]) ** 2
        assert abs(marginal_general(circuit, (0, 1), outcome) - expected) < 1e-12


@pytest.mark.parametrize("subsystem", [(0,), (1,), (3,), (0, 1), (1, 3)])
def test_marginal_general_matches_oracle_four_particles(subsystem):
    circuit = random_circuit(np.random.default_rng(29), 4, 4)
    oracle = marginal_by_sum(circuit, subsystem)
    for outcome in itertools.product((0, 1), repeat=len(subsystem)):
        assert abs(marginal_general(circuit, subsystem, outcome) - oracle[tuple(outcome)]) < 1e-9


def test_intra_subsystem_bookkeeping_is_interchangeable():
    circuit = random_circuit(np.random.default_rng(31), 4, 3)
    for outcome in itertools.product((0, 1), repeat=2):
        in_amp = marginal_general(circuit, (0, 1), outcome, intra_in_amplitude=True)
        in_lam = marginal_general(circuit, (0, 1), outcome, intra_in_amplitude=False)
        assert abs(in_amp - in_lam) < 1e-12


def test_subsystem_distribution_normalizes_and_matches_oracle():
    circuit = random_circuit(np.random.default_rng(37), 4, 3)
    dist = subsystem_distribution(circuit, (1, 2))
    oracle = marginal_by_sum(circuit, (1, 2))
    assert np.max(np.abs(dist.probabilities - oracle.probabilities)) < 1e-9


def test_epr_marginal_through_general_machinery():
    circuit = build_epr_circuit(random_single(np.random.default_rng(41)), np.eye(2))
    for j in (0, 1):
        assert abs(marginal_general(circuit, (0,), (j,)) - 0.5) < 1e-10


def test_lambda_block_budget_guard():
    circuit = random_circuit(np.random.default_rng(43), 4, 4)
    with pytest.raises(BudgetExceeded):
        lambda_block(circuit, (0, 1), (0, 0), budget=16)


def test_subsystem_validation():
    circuit = random_circuit(np.random.default_rng(47), 3, 2)
    with pytest.raises(ValueError):
        marginal_general(circuit, (), ())
    with pytest.raises(ValueError):
        marginal_general(circuit, (0, 1, 2), (0, 0, 0))
    with pytest.raises(ValueError):
        marginal_general(circuit, (0, 5), (0, 0))
