"""Atom-loss aware surface-code simulation and decoding toolkit."""

from .pauli import (
    PauliConfiguration,
    SpacetimeLocation,
    pauli_from_char,
    pauli_mul,
    pauli_to_char,
)
from .circuit import (
    AtomLifetime,
    Circuit,
    CircuitError,
    Instruction,
    LossConfiguration,
    LossPlan,
    LossReadout,
    compile_to_czh,
    map_location_to_czh,
    run_reference,
)
from .circuit_text import ParseError, parse_circuit, serialize_circuit
from .sim import (
    DemMechanism,
    DetectorOutcomePair,
    FrameIndex,
    NondeterministicDetectorError,
    PauliDEM,
    evaluate,
    extract_pauli_dem,
    frame_index,
    outcome_coset,
    propagate_frame,
    reference_info,
)
from .dense import DenseOracleError, dense_oracle, outcome_set

__version__ = "0.1.0"
