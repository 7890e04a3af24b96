"""Data-driven non-Markovian closures from kernel embeddings of conditional
distributions.

Resolved variables ``x`` are evolved with their known equations while the
unresolved terms are replaced by ``E[Y | z]``, estimated on delay states
``z = (x_{t-m:t}, y_{t-n:t-1})`` with orthonormal Hermite or POD features.
"""

__version__ = "0.1.0"

from .data import (DataError, DelayConfig, DesignMatrices, TimeSeriesDataset,
                   build_delay_states, delay_window, read_csv, stack_designs, write_csv)
from .basis import (BasisError, HermiteBasis, PODBasis, fit_hermite, fit_pod,
                    hermite_evaluate, pod_evaluate)
from .embedding import (ConditionalDensityModel, ConditionalExpectationModel, EmbeddingError,
                        conditional_second_moment, density_evaluate,
                        fit_conditional_density, fit_conditional_expectation, predict,
                        predict_general_drift)
from .closure import (BasisSpec, ClosureModel, ClosureState, DelayEstimator, DivergenceError,
                      ensemble_simulate, fit_delay_estimator, linear_estimator, seed_state,
                      simulate, step)
from .bundle import load_bundle, save_bundle
