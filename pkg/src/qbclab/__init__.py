"""Simulation toolkit for quantum bit commitment: honest protocols, concealment audits and cheating attacks."""
from .attack import (
    AttackReport,
    PurificationAttack,
    commit_double_prime,
    commit_prime,
    exact_attack_report,
    fidelity_audit,
    formal_identity,
    mc_attack_report,
    sample_attack,
    success_lower_bound,
    synthesize_unveil_prime,
    withheld_states,
)
from .core import (
    ClassicalTranscript,
    DensityMatrix,
    InvariantError,
    Owner,
    Party,
    PureState,
    QBCError,
    RegisterError,
    ResourceCapError,
    Unitary,
    allocate,
    apply_unitary,
    measure,
    partial_trace,
    transmit_classical,
    zero_state,
)
from .harness import ConfigError, ExperimentConfig, Report, emit_report, run_experiment
from .protocol import (
    Execution,
    ProtocolSpec,
    ProtocolViolation,
    Simulation,
    UnveilResult,
    audit_concealment,
    enumerate_branches,
    run_commit,
    run_unveil,
)
from .protocols import (
    bb84_decode,
    bb84_protocol,
    classical_guess_strategy,
    epr_attack_strategy,
    toy_protocol,
)
from .spectral import (
    PreconditionError,
    SchmidtDecomposition,
    closest_purification,
    fidelity,
    reduced_fidelity,
    schmidt,
    steering_unitary,
    trace_distance,
    uhlmann_partner,
)

__version__ = "0.1.0"
