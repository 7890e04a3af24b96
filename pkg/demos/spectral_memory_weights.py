"""Exact memory weights of the linear Gaussian closure.

The optimal linear predictor of y from x_{t-m:t} solves a Toeplitz
system built from the autocovariance of x. As m grows, the closure ACF
converges to the full-model ACF, and in the continuous limit the closure
spectrum coincides with the full spectrum.
"""

import numpy as np

from rkhs_closure import spectral
from rkhs_closure.systems import linear_gaussian as lg

p = lg.PAPER_PARAMS(1.3)
tau = 0.01
max_lag = 300
ref = lg.analytic_acv_linear(p, tau * np.arange(max_lag + 1))

print("m     convolution residual   max |ACF error|")
for m in (0, 5, 20, 100, 400):
    lags = tau * np.arange(m + 1)
    gxx, gxy = lg.analytic_acv_linear(p, lags), lg.analytic_cross_cov(p, lags)
    w = spectral.memory_weights_from_covariances(gxx, gxy, tau)
    res = spectral.verify_convolution_identity(w, gxx, gxy)
    acv = spectral.closure_acv_exact(w.S, tau, p.a11, p.a12, p.sigma_x, max_lag)
    err = np.abs(acv / acv[0] - ref / ref[0]).max()
    print(f"{m:<5d} {res:<22.1e} {err:.4f}")

omega = spectral.default_omega_grid(tau)
full = spectral.analytic_spectrum_full(p, omega)
limit = spectral.closure_spectrum_limit(p, omega)
print(f"\nspectrum: {len(omega)} frequencies, max |limit - full| = {np.abs(limit - full).max():.1e}")
