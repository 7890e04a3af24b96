"""Non-Markovian closure integrator.

At macro step ``t`` the closure forms the delay state
``z_t = (x_{t-m:t}, yhat_{t-n:t-1})`` from its buffers, predicts
``yhat_t = E[Y | z_t]`` (optionally plus Gaussian residual noise), integrates
the resolved equations over ``[t tau, (t+1) tau]`` with ``yhat_t`` frozen,
and then appends ``x_{t+1}`` and ``yhat_t`` to the buffers.

States carry a leading batch axis so ensembles advance in lock-step; each
member still consumes its own pre-drawn noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .basis import fit_hermite, fit_pod
from .data import DelayConfig, TimeSeriesDataset, build_delay_states, stack_designs
from .embedding import fit_conditional_expectation, psd_sqrt

__all__ = [
    "DivergenceError",
    "DelayComponent",
    "DelayEstimator",
    "FixedLinearEstimator",
    "linear_estimator",
    "BasisSpec",
    "fit_delay_estimator",
    "ClosureModel",
    "ClosureState",
    "Trajectory",
    "seed_state",
    "stack_states",
    "step",
    "simulate",
    "ensemble_simulate",
    "member_rng",
    "divergence_bound",
]


class DivergenceError(FloatingPointError):
    """The closure state left the finite/bounded region.

    Attributes ``step`` (macro step index) and ``last_state`` (the last
    finite :class:`ClosureState`) locate the failure.
    """

    def __init__(self, msg, step=None, last_state=None):
        super().__init__(msg)
        self.step = step
        self.last_state = last_state


# --------------------------------------------------------------------------
# estimators acting on delay buffers

class FixedLinearEstimator:
    """``yhat = offset + z @ coef`` with given coefficients.

    Used for analytic closures (averaging limit, exact memory weights).
    """

    def __init__(self, coef, offset=None, residual_cov=None):
        self.coef = np.atleast_2d(np.asarray(coef, dtype=float))
        n_g = self.coef.shape[1]
        self.offset = np.zeros(n_g) if offset is None else np.asarray(offset, float)
        self.residual_cov = np.zeros((n_g, n_g)) if residual_cov is None else residual_cov

    @property
    def n_z(self):
        return self.coef.shape[0]

    def predict(self, z):
        return self.offset + np.asarray(z, float) @ self.coef


@dataclass(frozen=True)
class DelayComponent:
    """One conditional-expectation model and the columns it sees.

    ``x_cols`` / ``y_cols`` select the resolved and unresolved columns whose
    histories form this component's delay state; ``target_cols`` are the
    unresolved columns it predicts.
    """

    model: object
    x_cols: tuple
    y_cols: tuple
    target_cols: tuple


@dataclass(frozen=True)
class DelayEstimator:
    """Maps delay buffers to predicted unresolved variables ``yhat``."""

    delay: DelayConfig
    n_x: int
    n_y: int
    components: tuple

    def delay_state(self, comp, x_hist, y_hist):
        """Delay states ``(B, n_z)`` of one component from batched buffers."""
        m1 = self.delay.m + 1
        B = x_hist.shape[0]
        parts = []
        if m1 > 0:
            parts.append(x_hist[:, x_hist.shape[1] - m1:, list(comp.x_cols)].reshape(B, -1))
        if self.delay.n > 0:
            parts.append(y_hist[:, :, list(comp.y_cols)].reshape(B, -1))
        return np.concatenate(parts, axis=1)

    def predict_buffers(self, x_hist, y_hist):
        out = np.empty((x_hist.shape[0], self.n_y))
        for comp in self.components:
            out[:, list(comp.target_cols)] = comp.model.predict(
                self.delay_state(comp, x_hist, y_hist))
        return out

    @property
    def residual_cov(self):
        R = np.zeros((self.n_y, self.n_y))
        for comp in self.components:
            rc = np.asarray(comp.model.residual_cov)
            idx = np.array(comp.target_cols)
            R[np.ix_(idx, idx)] = rc
        return R


def linear_estimator(coef, delay, n_x=1, n_y=1, offset=None, residual_cov=None):
    """Single-component :class:`DelayEstimator` around a fixed linear map.

    ``coef`` has shape ``(n_z, n_y)`` in delay-state column order.
    """
    coef = np.asarray(coef, dtype=float).reshape(-1, n_y)
    est = FixedLinearEstimator(coef, offset, residual_cov)
    if est.n_z != delay.n_z(n_x, n_y):
        raise ValueError(f"coef has {est.n_z} rows, delay state has {delay.n_z(n_x, n_y)}")
    comp = DelayComponent(est, tuple(range(n_x)), tuple(range(n_y)), tuple(range(n_y)))
    return DelayEstimator(delay, n_x, n_y, (comp,))


@dataclass(frozen=True)
class BasisSpec:
    """Which basis to fit per component.

    kind : "hermite" or "pod"
    degree, per_dim_cap : Hermite truncation
    L, energy : POD truncation (all numerically nonzero modes if neither)
    """

    kind: str = "hermite"
    degree: int = 3
    per_dim_cap: int | None = None
    L: int | None = None
    energy: float | None = None

    def fit(self, Z):
        if self.kind == "hermite":
            return fit_hermite(Z, self.degree, self.per_dim_cap)
        if self.kind == "pod":
            return fit_pod(Z, L=self.L, energy=self.energy)
        raise ValueError(f"unknown basis kind {self.kind!r}")


def _component_design(datasets, delay, x_cols, y_cols, target_cols):
    designs = []
    for ds in datasets:
        sub = TimeSeriesDataset(ds.tau, ds.x[:, list(x_cols)], ds.y[:, list(y_cols)])
        designs.append(build_delay_states(sub, delay, target=ds.y[:, list(target_cols)]))
    return designs[0] if len(designs) == 1 else stack_designs(designs)


def fit_delay_estimator(datasets, delay, basis=BasisSpec(), lam=None, components=None,
                        threads=1, store_weights=None):
    """Fit one conditional-expectation model per component.

    Parameters
    ----------
    datasets : TimeSeriesDataset or sequence of them
        Independent training trajectories; design rows are pooled.
    delay : DelayConfig
    basis : BasisSpec
    lam : float, optional
    components : sequence of (x_cols, y_cols, target_cols), optional
        Default is a single joint component over all columns.
    threads : int
        Worker threads for the per-component fits.
    """
    if isinstance(datasets, TimeSeriesDataset):
        datasets = [datasets]
    datasets = list(datasets)
    n_x, n_y = datasets[0].n_x, datasets[0].n_y
    if components is None:
        components = [(tuple(range(n_x)), tuple(range(n_y)), tuple(range(n_y)))]
    covered = sorted(c for comp in components for c in comp[2])
    if covered != list(range(n_y)):
        raise ValueError("components must predict every unresolved column exactly once")

    def fit_one(spec):
        x_cols, y_cols, target_cols = (tuple(int(c) for c in s) for s in spec)
        dm = _component_design(datasets, delay, x_cols, y_cols, target_cols)
        b = basis.fit(dm.Z)
        model = fit_conditional_expectation(dm, b, lam, store_weights=store_weights)
        return DelayComponent(model, x_cols, y_cols, target_cols)

    if threads > 1 and len(components) > 1:
        with ThreadPoolExecutor(threads) as pool:
            fitted = list(pool.map(fit_one, components))
    else:
        fitted = [fit_one(c) for c in components]
    return DelayEstimator(delay, n_x, n_y, tuple(fitted))


def divergence_bound(datasets, factor=1e6):
    """``factor`` times the largest resolved magnitude seen in training."""
    if isinstance(datasets, TimeSeriesDataset):
        datasets = [datasets]
    return factor * max(float(np.abs(ds.x).max()) for ds in datasets)


# --------------------------------------------------------------------------
# model, state, stepping

@dataclass(frozen=True)
class ClosureModel:
    """Resolved dynamics closed by a delay estimator.

    Parameters
    ----------
    known_drift : callable
        ``known_drift(x, yhat) -> dx/dt`` on batched arrays ``(B, n_x)``,
        ``(B, n_y)``.
    estimator : DelayEstimator or object with ``delay``, ``n_y`` and
        ``predict_buffers``
    tau : float
        Macro step, equal to the sampling lag of the training data.
    substeps : int
        Inner integration steps per macro step.
    diffusion : array or callable, optional
        Constant ``(n_x, n_w)`` diffusion matrix, or
        ``diffusion(x, z) -> (B, n_x, n_x)`` conditional second moment whose
        PSD square root is frozen over the macro step.
    residual_noise : (n_y, n_y) array, optional
        Covariance of Gaussian noise added to ``yhat`` once per macro step.
    scheme : {"auto", "euler", "rk4"}
        ``auto`` uses RK4 for deterministic closures, Euler-Maruyama else.
    bound : float, optional
        Abort when ``max |x|`` exceeds this value.
    """

    known_drift: Callable
    estimator: object
    tau: float
    substeps: int = 1
    diffusion: object = None
    residual_noise: np.ndarray | None = None
    scheme: str = "auto"
    bound: float | None = None
    _noise_factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.scheme not in ("auto", "euler", "rk4"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "rk4" and self.diffusion is not None:
            raise ValueError("rk4 is only available for deterministic closures")
        if self.residual_noise is not None:
            R = np.atleast_2d(np.asarray(self.residual_noise, dtype=float))
            if np.linalg.eigvalsh(0.5 * (R + R.T)).min() < -1e-10 * max(1.0, abs(R).max()):
                raise ValueError("residual_noise must be positive semidefinite")
            object.__setattr__(self, "_noise_factor", psd_sqrt(R))

    @property
    def delay(self):
        return self.estimator.delay

    @property
    def n_y(self):
        return self.estimator.n_y

    @property
    def stochastic(self):
        return self.diffusion is not None

    @property
    def n_w(self):
        if self.diffusion is None:
            return 0
        if callable(self.diffusion):
            return None
        return np.atleast_2d(self.diffusion).shape[1]

    @property
    def h(self):
        return self.tau / self.substeps

    @property
    def integrator(self):
        if self.scheme == "auto":
            return "euler" if self.stochastic else "rk4"
        return self.scheme


@dataclass(frozen=True)
class ClosureState:
    """Delay buffers of a (batch of) closure run(s).

    ``x_hist`` has shape ``(B, max(m+1, 1), n_x)`` (oldest first, last entry
    is the current state) and ``y_hist`` ``(B, n, n_y)``.
    """

    x_hist: np.ndarray
    y_hist: np.ndarray
    t: int = 0
    batched: bool = False

    @property
    def x(self):
        x = self.x_hist[:, -1]
        return x if self.batched else x[0]

    @property
    def batch_size(self):
        return self.x_hist.shape[0]


def _hist_len(delay):
    return max(delay.m + 1, 1)


def seed_state(ds, at_index, cfg):
    """Fill the buffers from data at sample ``at_index`` (int or array of ints)."""
    idx = np.atleast_1d(np.asarray(at_index, dtype=int))
    lag = cfg.lag
    if np.any(idx < lag) or np.any(idx >= ds.N):
        raise IndexError(f"seed index must lie in [{lag}, {ds.N - 1}]")
    hx = _hist_len(cfg)
    xh = np.stack([ds.x[i - hx + 1:i + 1] for i in idx])
    yh = np.stack([ds.y[i - cfg.n:i] for i in idx]) if cfg.n else np.zeros((len(idx), 0, ds.n_y))
    return ClosureState(xh, yh, 0, batched=np.ndim(at_index) > 0)


def stack_states(states):
    """Concatenate states along the batch axis."""
    states = list(states)
    return ClosureState(np.concatenate([s.x_hist for s in states]),
                        np.concatenate([s.y_hist for s in states]),
                        states[0].t, batched=True)


def _diffusion_factor(model, x, z_parts):
    D = model.diffusion
    if D is None:
        return None
    if callable(D):
        return psd_sqrt(np.asarray(D(x, z_parts)))
    return np.atleast_2d(np.asarray(D, dtype=float))


def step(model, state, rng=None, xi=None, eta=None):
    """Advance one macro step.

    Parameters
    ----------
    xi : (substeps, B, n_w) array, optional
        Standard normal increments of the driving noise; drawn from ``rng``
        when omitted.
    eta : (B, n_y) array, optional
        Standard normal draws for the residual noise on ``yhat``.

    Returns
    -------
    new_state, x_next, y_hat
    """
    xh, yh = state.x_hist, state.y_hist
    B = xh.shape[0]
    x = xh[:, -1]
    if rng is None:
        rng = np.random.default_rng()
    yhat = model.estimator.predict_buffers(xh, yh)
    if model._noise_factor is not None:
        if eta is None:
            eta = rng.standard_normal((B, model.n_y))
        yhat = yhat + eta @ model._noise_factor.T
    h = model.h
    f = model.known_drift
    if model.integrator == "rk4":
        for _ in range(model.substeps):
            k1 = f(x, yhat)
            k2 = f(x + 0.5 * h * k1, yhat)
            k3 = f(x + 0.5 * h * k2, yhat)
            k4 = f(x + h * k3, yhat)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        S = _diffusion_factor(model, x, (xh, yh))
        if S is not None and xi is None:
            xi = rng.standard_normal((model.substeps, B, S.shape[-1]))
        sh = np.sqrt(h)
        for j in range(model.substeps):
            x = x + h * f(x, yhat)
            if S is not None:
                if S.ndim == 2:
                    x = x + sh * (xi[j] @ S.T)
                else:
                    x = x + sh * np.einsum("bij,bj->bi", S, xi[j])
    new_x = np.concatenate([xh[:, 1:], x[:, None, :]], axis=1)
    if yh.shape[1]:
        new_y = np.concatenate([yh[:, 1:], yhat[:, None, :]], axis=1)
    else:
        new_y = yh
    if not np.all(np.isfinite(x)) or (model.bound is not None and np.abs(x).max() > model.bound):
        raise DivergenceError(f"closure diverged at macro step {state.t}", state.t, state)
    new_state = ClosureState(new_x, new_y, state.t + 1, state.batched)
    if state.batched:
        return new_state, x, yhat
    return new_state, x[0], yhat[0]


@dataclass(frozen=True)
class Trajectory:
    """Closure output: ``x`` has ``steps + 1`` rows, ``y`` (the emitted
    ``yhat_t``) has ``steps`` rows aligned with ``x[:-1]``."""

    tau: float
    x: np.ndarray
    y: np.ndarray
    t0: float = 0.0
    final_state: ClosureState | None = None

    @property
    def t(self):
        return self.t0 + self.tau * np.arange(self.x.shape[0])

    def to_dataset(self, member=None, x_names=None, y_names=None):
        """Rows ``(t, x_t, yhat_t)`` for ``t < steps`` as a dataset."""
        x, y = self.x[:-1], self.y
        if member is not None:
            x, y = x[:, member], y[:, member]
        return TimeSeriesDataset(self.tau, x, y, self.t0, x_names, y_names)


def simulate(model, state0, steps, rng=None, xi=None, eta=None, t0=0.0):
    """Iterate :func:`step` ``steps`` times.

    ``xi`` of shape ``(steps, substeps, B, n_w)`` and ``eta`` of shape
    ``(steps, B, n_y)`` supply all noise explicitly (e.g. to share the
    Brownian path with a reference simulation); otherwise noise is drawn
    from ``rng``. A :class:`DivergenceError` carries the last finite state.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    B = state0.batch_size
    n_x = state0.x_hist.shape[2]
    xs = np.empty((steps + 1, B, n_x))
    ys = np.empty((steps, B, model.n_y))
    xs[0] = state0.x_hist[:, -1]
    state = replace(state0, batched=True)
    for t in range(steps):
        state, xs[t + 1], ys[t] = step(
            model, state, rng,
            None if xi is None else xi[t],
            None if eta is None else eta[t])
    state = replace(state, batched=state0.batched)
    if not state0.batched:
        return Trajectory(model.tau, xs[:, 0], ys[:, 0], t0, state)
    return Trajectory(model.tau, xs, ys, t0, state)


def member_rng(base_seed, *key):
    """Independent generator for the stream identified by ``(base_seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), *map(int, key)]))


def ensemble_simulate(model, truth, init_index, n_ens, steps, perturbation_sd=0.0,
                      base_seed=0, n_w=None, return_y=False):
    """Perturbed-initial-condition ensembles started from truth data.

    Parameters
    ----------
    truth : TimeSeriesDataset
        Supplies the initial buffers via :func:`seed_state`.
    init_index : int or sequence of int
        Start index (or one per forecast case).
    n_ens : int
    steps : int
    perturbation_sd : float
        IID Gaussian perturbation added to every entry of the initial x
        buffer.
    base_seed : int
        Member ``e`` of case ``c`` draws from ``member_rng(base_seed, c, e)``.
    n_w : int, optional
        Width of the driving noise when ``model.diffusion`` is callable.

    return_y : bool
        Also return the emitted ``yhat`` of shape ``(..., steps, n_y)``.

    Returns
    -------
    x : array (n_cases, n_ens, steps + 1, n_x), or without the case axis for
        a scalar ``init_index``.
    """
    if perturbation_sd < 0:
        raise ValueError("perturbation_sd must be non-negative")
    scalar = np.ndim(init_index) == 0
    idx = np.atleast_1d(init_index)
    base = seed_state(truth, idx, model.delay)
    n_cases = len(idx)
    B = n_cases * n_ens
    xh = np.repeat(base.x_hist, n_ens, axis=0)
    yh = np.repeat(base.y_hist, n_ens, axis=0)
    if model.stochastic:
        if n_w is None:
            n_w = model.n_w if model.n_w is not None else truth.n_x
    xi = np.empty((steps, model.substeps, B, n_w)) if model.stochastic else None
    eta = np.empty((steps, B, model.n_y)) if model._noise_factor is not None else None
    for c in range(n_cases):
        for e in range(n_ens):
            b = c * n_ens + e
            g = member_rng(base_seed, c, e)
            xh[b] = xh[b] + perturbation_sd * g.standard_normal(xh[b].shape)
            if xi is not None:
                xi[:, :, b] = g.standard_normal((steps, model.substeps, n_w))
            if eta is not None:
                eta[:, b] = g.standard_normal((steps, model.n_y))
    state = ClosureState(xh, yh, 0, batched=True)
    traj = simulate(model, state, steps, xi=xi, eta=eta)
    x = traj.x.reshape(steps + 1, n_cases, n_ens, -1).transpose(1, 2, 0, 3)
    y = traj.y.reshape(steps, n_cases, n_ens, -1).transpose(1, 2, 0, 3)
    if scalar:
        x, y = x[0], y[0]
    return (x, y) if return_y else x
