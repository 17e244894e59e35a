"""Global-pulse decoupling of Ising-coupled spin registers in a field gradient."""

from .effective import (coupling_reduction, h1eff_analytic, h2eff_analytic, h3eff_analytic, heff_n_analytic,
                        numeric_effective, reduction_factor, secular_effective, secular_projection)
from .magnus import BranchCutError, MagnusResult, Segment, exact_generator, magnus_terms
from .operators import (PauliSum, commutator, conjugate, embed_pauli, fidelity, global_rotation,
                        pauli_decompose, propagator, state_fidelity)
from .sequences import (BlockParams, Evolution, Pulse, Schedule, basic_block, compile_to_physical,
                        conjugated_pair, insert_hahn_echo, repeat, wahuha_block)
from .simulator import ExperimentConfig, decay_rate_ratio, extract_decay_rate, run_experiment
from .systems import CouplingNoise, Geometry, RegisterSpec, Topology, build_register, lattice_register

__version__ = "0.1.0"

__all__ = [
    "BlockParams", "BranchCutError", "CouplingNoise", "Evolution", "ExperimentConfig", "Geometry",
    "MagnusResult", "PauliSum", "Pulse", "RegisterSpec", "Schedule", "Segment", "Topology",
    "basic_block", "build_register", "commutator", "compile_to_physical", "conjugate", "conjugated_pair",
    "coupling_reduction", "decay_rate_ratio", "embed_pauli", "exact_generator", "extract_decay_rate",
    "fidelity", "global_rotation", "h1eff_analytic", "h2eff_analytic", "h3eff_analytic", "heff_n_analytic",
    "insert_hahn_echo", "lattice_register", "magnus_terms", "numeric_effective", "pauli_decompose",
    "propagator", "reduction_factor", "repeat", "run_experiment", "secular_effective", "secular_projection",
    "state_fidelity", "wahuha_block",
]
