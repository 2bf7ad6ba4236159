"""Condensed Stein variational gradient descent.

A particle-ensemble method that concurrently trains, sparsifies, and aligns
feed-forward networks under sparsifying priors, yielding parameter-level
uncertainty estimates.  See README.md for the experiment CLI.
"""

from .engine import (Ensemble, RunReport, StageReport, SvgdConfig,
                     active_param_count, condense_ensemble, ensemble_distances,
                     init_net_ensemble, init_vector_ensemble, load_checkpoint,
                     resume_csvgd, run_csvgd, run_stage, save_checkpoint,
                     stein_gradient, svgd_step)
from .errors import (CheckpointError, CondenseError, DomainError,
                     NonFiniteGradientError, ShapeError)
from .kernels import (KernelSpec, kernel_eval, kernel_grad, median_bandwidth,
                      silverman_bandwidth)
from .likelihoods import (Dataset, DirectNetModel, MvnTarget, RegressionTarget,
                          load_dataset, mvn_score, save_dataset)
from .metrics import (GaussianSummary, bhattacharyya, moving_average,
                      pushforward_w1, sparsity_l1, wasserstein1)
from .network import (LayeredNet, Layout, forward, forward_batch, grad_input,
                      grad_params, load_net, param_count, permute_hidden,
                      save_net)
from .priors import PriorSpec, log_prior_density, prior_constants, prior_score

__version__ = "0.1.0"
