"""Weighted likelihood estimation for censored survival data under misspecification."""
__version__ = "0.1.0"

from .errors import (BoundaryError, ConvergenceError, DomainError, LFSurvError, ParseError,
                     QuadratureError, SeparationError, SingularMatrixError, ValidationError)
from .dataset import (SurvivalDataset, SurvivalRecord, counting_view, kaplan_meier, load_csv,
                      nelson_aalen)
from .weights import SmoothWeight, StepWeight, WeightPlan
from .families import (Exponential, Gompertz, HazardFamily, PiecewiseConstant, Weibull,
                       Weibull2, integrate_weighted, make_family)
from .fit import (FitResult, confidence_region, fit_ml, hessian, j_hat, k_hat,
                  least_false_oracle, log_likelihood, score)
from .influence import influence_empirical, influence_theoretical, jackknife_check
from .bootstrap import bootstrap, variance_ratio_experiment
from .cox import (cox_bootstrap, cox_influence, fit_cox_parametric, fit_cox_partial,
                  partial_loglik)
from .distance import (cox_distance, cox_least_false, hazard_distance, kl_identity_check,
                       make_truth)
from .local import fit_local
from .simulate import (censor_rate_for_fraction, coverage_study, efficiency_formulas,
                       efficiency_study, simulate_sample)

__all__ = [n for n in dir() if not n.startswith("_")]
