"""QAOA Max-Cut toolkit: statevector simulation, symmetry-based parameter
normalization, graph-network angle prediction, and initialization benchmarks."""

from .errors import (BoundsError, DomainError, FormatError, GenerationError,
                     ParameterError, QseerError, UnavailableError)
from .graph import (Graph, enumerate_connected_nonisomorphic, gen_random,
                    make_graph, max_cut_bruteforce, mean_abs_weight,
                    normalize_edge_weights)
from .normalize import NormalizedParams, canonicalize, fold_beta, time_reversal
from .qaoa import (OptimizationResult, ParamVector, adam_optimize,
                   approximation_ratio, cut_values, evolve, expectation,
                   gradient, linear_ramp_init, multistart_optimize)

__version__ = "0.1.0"
