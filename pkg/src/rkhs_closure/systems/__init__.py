"""Reference systems: two-scale linear Gaussian SDE, two-layer Lorenz-96 and
truncated Burgers-Hopf."""

from . import l96, linear_gaussian, tbh
from .l96 import L96Params, simulate_l96, wilks_evaluate, wilks_fit
from .linear_gaussian import (PAPER_PARAMS, LinearGaussianParams, averaged_model,
                              lyapunov_equilibrium_cov, simulate_linear_gaussian)
from .tbh import TBHParams, simulate_tbh, tbh_initial_condition
