"""History vectors, history density matrices and space/temporal entanglement entropy."""

from histent._kernels import BACKEND
from histent.circuits import (
    CircuitSpec,
    GateSpec,
    double_slit_schedule,
    entangler_schedule,
    gate_matrix,
    teleportation_schedule,
    teleportation_schedule_p,
)
from histent.entanglement import (
    HistoryDensity,
    SpacePartition,
    alice_only_schedule,
    density_from_history,
    mix,
    no_signaling_check,
    sequence_probability,
    space_entanglement_entropy,
    space_product,
    space_reduce,
    space_separability,
    temporal_entanglement_entropy,
    time_product,
    time_reduce,
    time_separability,
)
from histent.errors import HistentError, InputError, NumericalInvariantError
from histent.history import (
    HistoryVector,
    MeasurementEvent,
    Schedule,
    amplitude,
    build_history_vector,
    chain_operator,
    decoherence_functional,
    is_consistent_set,
    marginal_check,
    probability,
)
from histent.io import parse_circuit_file, schedule_to_dict, write_schedule
from histent.tensor import (
    SpaceFactorization,
    hermitian_eigenvalues,
    hermitian_eigh,
    kron,
    partial_trace,
    von_neumann_entropy,
)

__version__ = "0.1.0"
