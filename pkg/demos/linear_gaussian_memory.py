"""Memory matters: averaged closure vs a delay-embedded closure.

For the two-variable linear Gaussian system at eps = 1.3 the fast
variable is not fast, so the averaged (Markovian) closure gets the
autocorrelation of x badly wrong. A POD closure on 500 delays of x
recovers it. Runs in about half a minute.
"""

import numpy as np

from rkhs_closure import stats
from rkhs_closure.closure import BasisSpec, ClosureModel, fit_delay_estimator, seed_state, simulate
from rkhs_closure.data import DelayConfig
from rkhs_closure.systems import linear_gaussian as lg

p = lg.PAPER_PARAMS(1.3)
tau = 0.01

# training data: 1e5 samples of the full model
train = lg.simulate_linear_gaussian(p, 1000, rng=0)
print(f"training samples: {train.N}")

# y given the last 501 values of x, POD basis, no ridge (ordinary least squares)
est = fit_delay_estimator(train, DelayConfig(500, 0), BasisSpec("pod"), 0.0, store_weights=False)
closure = ClosureModel(lambda x, y: p.a11 * x + p.a12 * y, est, tau, 1, diffusion=[[p.sigma_x]])
averaged = lg.averaged_model(p, tau, 10)

lags = np.arange(0, 501, 50)
exact = lg.analytic_acv_linear(p, tau * lags)
exact = exact / exact[0]

starts = np.linspace(500, train.N - 1, 50).astype(int)
rows = {"full model (exact)": exact}
for name, model, delay in (("delay closure", closure, est.delay),
                           ("averaged closure", averaged, DelayConfig(0, 0))):
    x = simulate(model, seed_state(train, starts, delay), 10_000, rng=1).x[1:, :, 0]
    rows[name] = stats.acf(x, 500).values[lags]

print("\nnormalized ACF of x")
print("lag".ljust(20) + "".join(f"{tau * l:7.1f}" for l in lags))
for name, v in rows.items():
    print(name.ljust(20) + "".join(f"{a:7.3f}" for a in v))
