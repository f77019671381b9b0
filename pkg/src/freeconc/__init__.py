"""Free-probability concentration toolkit for block Markov chains and related models."""
from .errors import (ConfigError, ConvergenceError, DomainError, ErgodicityError, FreeConcError, NumericError,
                     ShapeError)
from .matrix_core import (eigvalsh, jacobi_eigh, normalized_trace_power, operator_norm, selfadjoint_dilation,
                          sigma_param, singular_values, v_param)
from .cumulants import (MomentOracle, boolean_cumulant, boolean_markov_telescoping, classical_cumulant,
                        classical_from_boolean, runs_partition, set_partitions, verify_identities)
from .dependence import FiniteChain, capital_psi, mixing_time, psi_coefficient, psipi_bound, stationary_distribution
from .free_bounds import (BlockProfile, MarkovBoundParams, SeriesBoundParams, bmc_profile, lehner_diagonal_upper,
                          markov_tail, minmax_m, moments_tail, pisier_bracket, series_tail, universality_H)
from .dyson import DysonSystem, density_grid, solve_dyson, support_edge
from .bmc import BmcSpec, bound_report, frak_params, limiting_m, mhat, simulate_path
from .models import GnmSpec, SubWeibullSpec, feray_graph_params, sample_gnm, sample_subweibull_wigner
from .montecarlo import TrialConfig, gaussian_model_sample, ks_distance, moment_gap, run_trials

__version__ = "0.1.0"
