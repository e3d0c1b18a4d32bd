"""annealtrack: quantum-annealing emulation of a spin-cQED processor applied
to multiple-hypothesis radar tracking.

Layers, bottom up: ``graph`` (MWIS instances and exact solvers), ``ising``
(problem encoding and schedules), ``device`` (cQED qubit physics, dispersive
couplings and noise rates), ``dynamics`` (open-system annealing for small
registers), ``sqa`` (path-integral Monte Carlo annealing for large ones),
``mht`` (the tracking application), ``timing`` (hardware run-time model) and
``cli`` (command-line surface).
"""

from ._backend import kernel_backend
from .errors import (AnnealTrackError, CapacityError, ConfigurationError,
                     InputError, NumericalFailure)
from .graph import (WeightedGraph, drop_nonpositive, is_independent,
                    load_graph, mwis_exact, total_weight)
from .ising import (DecodeMap, IsingProblem, Schedule, decode_spins,
                    encode_mwis, ground_state_exhaustive, ising_energy,
                    schedule_eval)

__version__ = "0.1.0"

__all__ = [
    "AnnealTrackError", "CapacityError", "ConfigurationError", "InputError",
    "NumericalFailure",
    "WeightedGraph", "drop_nonpositive", "is_independent", "load_graph",
    "mwis_exact", "total_weight",
    "DecodeMap", "IsingProblem", "Schedule", "decode_spins", "encode_mwis",
    "ground_state_exhaustive", "ising_energy", "schedule_eval",
    "kernel_backend", "__version__",
]
