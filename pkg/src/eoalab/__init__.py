"""Entanglement-of-assistance measures, distillation protocols, and
environment-assisted channel capacities at desk scale."""

from .qcore import (
    DensityOperator,
    PureState,
    ResourceCapError,
    binary_entropy,
    eig_hermitian,
    entanglement_entropy,
    fidelity,
    partial_trace,
    permute_parties,
    pure_marginal,
    relabel,
    schmidt,
    tensor,
    trace_distance,
    von_neumann_entropy,
)
from .states import (
    Ensemble,
    ensemble_average,
    ensemble_from_helper_basis,
    haar_unitary,
    make_aharonov,
    make_epr,
    make_example1_phi,
    make_ghz,
    make_upsilon,
    make_w,
    purify,
    read_state_file,
    write_state_file,
)

__version__ = "0.1.0"
