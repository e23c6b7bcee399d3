"""Hub / periphery classification of territorial units with an Ising model.

Composite indicators feed the external field, territorial similarity defines
the couplings, simulated annealing estimates per-unit hub probabilities and
split-conformal intervals quantify their uncertainty.
"""

__version__ = "0.1.0"

from .conformal import (ConformalConfig, PredictionInterval, conformal_quantile, coverage_report,
                        nonconformity_scores, prediction_intervals, split_conformal)
from .diagnostics import (MismatchMatrix, bootstrap_ci, jensen_shannon, mismatch,
                          predict_classes, score_configurations)
from .indices import (ExternalField, IndicatorSpec, IndicatorTable, PcaDecomposition,
                      correlation_matrix, external_field, mpi, pca, standardize)
from .network import AttributeProfile, InteractionGraph, build_graph, neighbor_sum, spectrum_summary
from .sampler import (AnnealingSchedule, ChainSpec, MarginalEstimate, acceptance_probability,
                      delta_energy, hamiltonian, run_chain, run_replicates, sample_configurations,
                      temperature_at)
