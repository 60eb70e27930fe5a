"""Subsystem marginals of controlled-phase circuits via a local sum-over-paths
hidden-variable decomposition, checked against an exact state-vector oracle."""

from .circuits import (
    BadParticleIndex,
    Circuit,
    CircuitError,
    CircuitFormatError,
    DuplicatePhasePair,
    Layer,
    NonUnitaryGate,
    PhaseGate,
    build_epr_circuit,
    circuit_digest,
    condition_phase_gate,
    dumps_canonical,
    factor_phase_gate,
    load_circuit,
    make_circuit,
    save_circuit,
    validate_circuit,
)
from .common import DEFAULT_BUDGET, BudgetExceeded, RealityError
from .density import (
    DensityPair,
    density_step,
    hit_offdiagonal,
    hit_pathsum_amplitude,
    normalized_phase_form,
)
from .oracle import Distribution, evolve, joint_distribution, marginal_by_sum, reduced_density
from .paths import (
    ConditionalUnitary,
    Path,
    amplitude_via_paths,
    condition_on_paths,
    enumerate_paths,
    joint_phase,
    path_amplitude,
)
from .subsystems import (
    ConfigPath,
    config_path_amplitude,
    lambda_general,
    lambda_general_trajectory,
    marginal_general,
    subsystem_distribution,
)
from .threeparticle import (
    HitBreakdown,
    delta_ab,
    delta_ac,
    gamma_chi_b,
    gamma_chi_c,
    hit_three,
    lambda_three,
    marginal_three,
    remove_trailing_external_gate,
)
from .twoparticle import (
    LambdaEntry,
    hit,
    lambda_accumulate,
    lambda_direct,
    marginal_lambda,
    marginal_lambda_deviation,
)
from .verify import VerificationReport, verify_circuit
