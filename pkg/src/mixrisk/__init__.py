"""VaR and Expected Shortfall for linear portfolios under elliptic mixtures."""

from .errors import (ConvergenceError, DomainError, InfeasibleConfidenceError, InvalidCorrelationError,
                     MixriskError, TailSampleError, UnsupportedModelError, ValidationError)
from .es import (aggregate_es, es_delta_theta, es_general_moments, es_generic, es_student_mixture,
                 expected_shortfall)
from .generators import Custom, GeneratorKind, Normal, StudentT
from .model import (EllipticComponent, MixtureModel, Portfolio, common_model, component, load,
                    portfolio_mean, portfolio_stdev, validate)
from .var import (CONVENTION, QuantileSolution, RiskReport, aggregate_by_correlation, aggregate_var,
                  implied_correlation, incremental_var, mixture_tail, solve_quantile, value_at_risk,
                  var_common_moments, var_delta_theta, var_general)

__version__ = "0.1.0"
