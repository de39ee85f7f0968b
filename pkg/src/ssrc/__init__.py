"""Identification and simulation of stochastically structured reservoir computers."""

__version__ = "0.1.0"

from .core import (
    NoiseSpec,
    RelationalGraph,
    StochasticMatrix,
    StochasticVector,
    TimeSeriesFrame,
    devectorize,
    heaviside_threshold,
    project_to_simplex,
    vectorize,
)
from .embedding import (
    CompressionMatrix,
    MonomialTable,
    build_compression,
    build_monomial_table,
    embed_full,
    embed_reduced,
    kron_power,
)
from .ident import (
    CouplingModel,
    StructuredDictionary,
    assemble_constrained_system,
    build_data_matrices,
    build_dictionary,
    closed_loop_decompose,
    identify,
)
from .sim import (
    SimulationSpec,
    Trajectory,
    forecast,
    generate_competition_scenario,
    simulate,
    step,
)
from .slrsolver import SolverConfig, SolverResult, nnls_restricted, solve, truncated_svd_init

__all__ = [
    "NoiseSpec",
    "RelationalGraph",
    "StochasticMatrix",
    "StochasticVector",
    "TimeSeriesFrame",
    "devectorize",
    "heaviside_threshold",
    "project_to_simplex",
    "vectorize",
    "CompressionMatrix",
    "MonomialTable",
    "build_compression",
    "build_monomial_table",
    "embed_full",
    "embed_reduced",
    "kron_power",
    "CouplingModel",
    "StructuredDictionary",
    "assemble_constrained_system",
    "build_data_matrices",
    "build_dictionary",
    "closed_loop_decompose",
    "identify",
    "SimulationSpec",
    "Trajectory",
    "forecast",
    "generate_competition_scenario",
    "simulate",
    "step",
    "SolverConfig",
    "SolverResult",
    "nnls_restricted",
    "solve",
    "truncated_svd_init",
]
