"""Spectral estimation and classification for grouped panel data."""

from .classify import Classification, LambdaGrid, classify, find_lambda_hat, run_classification_algorithm
from .dgp import DgpConfig, generate_dgp, generate_ife_panel
from .dynamic import DynamicFit, augment_panel, dynamic_post_spectral, dynamic_spectral
from .eigsolve import RandEigConfig, SymmetricOperator, dense_eigs, randomized_topk_abs_eigs, topk_abs_eigs
from .errors import PanelNumericError, PanelValueError
from .panel import BalancedPanel, GroupAssignment, PanelSchema, RngSpec, load_panel_csv, write_panel_csv
from .penalized import LassoProblem, LassoSolution, lambda_rule, penalized_spectral, solve_penalized
from .postspectral import PostSpectralFit, clustered_vcov, oracle_ols, pooled_ols, post_spectral
from .simulate import misclassification_rate, run_replications
from .spectral import (
    SpectralConfig,
    SpectralFit,
    estimate_gm_product,
    f_hat,
    reconstruct_quadratic,
    spectral_estimate,
    spectral_estimate_ife,
)

__version__ = "0.1.0"
