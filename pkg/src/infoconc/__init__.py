"""Numerical verification toolkit for concentration of information content
over log-concave measures with exp-concave potentials."""

__version__ = "0.1.0"

from .potentials import (DomainError, Potential, PotentialError, SupportSpec,
                         add_nonsmooth, compose_sum, embed, indicator,
                         l1_potential, make_builtin, scale)
from .expconcavity import (EtaCertificate, NotExpConcaveAtPointError, certify,
                           local_eta, project_gradient_check,
                           regularized_local_eta)
from .samplers import (ChainConfig, Diagnostics, DivergenceError, SampleBatch,
                       TuningFailureError, UnsupportedExactSamplerError, ess,
                       ks_statistic, sample_exact, sample_mcmc)
from .concentration import (BoundSpec, TailReport, VarianceReport,
                            bound_exp_concave, bound_iid, bound_log_concave,
                            clopper_pearson_upper, estimate_mgf, estimate_tails,
                            estimate_variance_bounds, mgf_product_bound,
                            regime_table)
from .functional import (BlMonteCarlo, QuadratureError, TestFunction,
                         bl_check_montecarlo, bl_check_quadrature,
                         counterexample_divergence, f_constant, f_coordinate,
                         f_square, f_tanh, subgaussian_mgf_probe)
from .experiments import (ExpWeightsResult, HpdResult, InfoDensityReport,
                          MinimizationError, OnlineRound, deviation_frequency,
                          hpd_experiment, information_density_experiment,
                          minimize_convex, portfolio_loss_stream,
                          run_exp_weights)
