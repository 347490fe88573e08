"""Covariance chains of wide Gaussian networks: simulation, infinite-width limits,
large-deviation rates and Gaussian-likelihood tilting on grid-discretized operators."""

from .activations import ActivationSpec, clipped_linear, erf, from_table, get_activation, identity, relu, tanh
from .chain import (ChainState, NetworkConfig, chain_step, init_kernel, simulate_chain, simulate_chains,
                    simulate_network_outputs)
from .diagnostics import NormalityReport, clt_diagnostic, energy_test, singvalue_tail_check
from .errors import (ConfigError, InsufficientHits, InvalidArgument, InvalidKernel, NotPSD, OffGridInput,
                     UnstableMGF, UnsupportedGrowth)
from .fields import FieldSample, cf_operator, empirical_covariance, sample_field
from .nngp import (DistanceCurve, NngpOptions, arccos_relu, arcsin_erf, erf_arcsin_kernel, lln_distance_curve,
                   nngp_chain, nngp_kernels, nngp_step, relu_arccos_kernel)
from .operators import (DEFAULT_TOL, Grid, KernelGrid, OperatorRep, Tolerances, equiv_metrics, hs_norm,
                        kernel_to_operator, make_grid, op_norm, operator_from_function, powers_stormer_gap,
                        powers_stormer_variant, psd_project, sqrt_op, trace, trace_norm)
from .posterior import (PosteriorEnsemble, SearchOptions, TrainingSet, estimate_I0, mf_rate, posterior_log_weight,
                        posterior_resample, psi, psi_mf, sigma_matrix)
from .rate import (DualObjective, DualVariable, RateEstimate, RateOptions, TailEvent, chain_rate, log_mgf, rate_eval,
                   scalar_rate_closed_form, tail_slope)
from .rng import SeedSpec
