"""Graphon signal processing, graph/graphon neural networks and their stability bounds."""

from .errors import (ConfigError, DivergenceError, DomainError, GraphonStabError, InvariantError,
                     RangeError, ShapeError, SingularityError, UndefinedGapError)
from .graphon import (ConstantGraphon, GridGraphon, PerturbationSpec, SBMGraphon, SmoothExpGraphon,
                      estimate_lipschitz, max_degree, perturb)
from .sampling import Graph, deterministic_graph, induce_signal, induced_graphon, sample_signal, stochastic_graph
from .spectral import SignedSpectrum, decompose, delta_c, n_c, operator_norm
from .filters import BandFilter, PolyFilter, apply_poly, apply_spectral, graphon_convolution
from .gnn import GnnParams, gnn_forward, train_mse, wnn_forward
from .stability import (StabilityReport, bound_lemma1, bound_thm1, bound_thm2, bound_thm3,
                        bound_thm4, check_as4, run_stability_cell)
from .graphlimits import convergence_table, hom_density_graph, hom_density_graphon
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"
