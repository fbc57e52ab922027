"""Multi-parameter GAMs with nested covariate transformations.

Linear predictors may contain smooth effects of parameter-dependent
covariate transformations (exponential smoothing, kernel smoothing, linear
indices). Transformation parameters are estimated jointly with regression
coefficients by Newton MAP; smoothing parameters maximise a Laplace
approximate marginal likelihood with gradients from implicit
differentiation.
"""

from . import basis, families, oracle, transforms  # noqa: F401

__version__ = "0.1.0"
