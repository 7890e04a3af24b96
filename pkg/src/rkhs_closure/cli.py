"""Batch driver: ``generate -> train -> predict -> evaluate`` plus analytic oracles.

Configs are INI files (``[section]`` / ``key = value``). Relative paths in
``[paths]`` resolve against the output directory, so one ``--out`` directory
holds a whole experiment. Every command writes ``manifest_<command>.json``
next to its outputs; it contains no timestamps, so identical configs and
seeds give byte-identical output trees.

Exit codes: 0 ok, 2 configuration/usage error, 3 numerical divergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bundle import BundleError, load_bundle, save_bundle
from .closure import (BasisSpec, ClosureModel, DivergenceError, ensemble_simulate,
                      fit_delay_estimator)
from .data import DataError, DelayConfig, TimeSeriesDataset, read_csv, write_csv
from .embedding import EmbeddingError
from .spectral import (analytic_memory_weights, analytic_spectrum_full,
                       closure_spectrum_limit, default_omega_grid,
                       verify_convolution_identity, write_spectrum_csv)
from .stats import (acf, ccf, pdf_estimate, pdf_l1_distance, rank_histogram,
                    rank_histogram_pvalue, rmse_ancr, sup_error, wave_statistics)
from .systems import l96 as l96_mod
from .systems import linear_gaussian as lg
from .systems import tbh as tbh_mod

__all__ = ["main", "ConfigError", "UsageError", "load_config", "ExperimentConfig"]

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO = 0, 2, 3, 4

REQUIRED = object()

# section -> key -> (type, default)
SCHEMA = {
    "run": {"seed": ("int", REQUIRED), "out": ("str", "out"), "threads": ("int", 1)},
    "system": {
        "name": ("choice:linear_gaussian,l96,tbh", REQUIRED),
        "T": ("float", 1000.0), "tau": ("float", 0.01), "dt": ("float?", None),
        "burn_in": ("float?", None), "eps": ("float?", None),
        "a11": ("float", -1.0), "a12": ("float", 1.0), "a21": ("float", -1.0),
        "a22": ("float", -1.0), "sigma_x": ("float", math.sqrt(2.0)),
        "sigma_y": ("float", math.sqrt(2.0)),
        "K": ("int", 18), "J": ("int", 20), "F": ("float", 10.0),
        "h_x": ("float", -1.0), "h_y": ("float", 1.0),
        "Lambda": ("int", 50), "beta": ("float", 10.0),
    },
    "delay": {"m": ("int", 0), "n": ("int", 0)},
    "basis": {"kind": ("choice:hermite,pod", "hermite"), "degree": ("int", 3),
              "per_dim_cap": ("int?", None), "L": ("int?", None), "energy": ("float?", None)},
    "estimator": {"lambda": ("float?", None),
                  "layout": ("choice:auto,joint,per_k,tbh", "auto"),
                  "neighbors": ("int", 0)},
    "closure": {"substeps": ("int", 1),
                "residual_noise": ("choice:auto,off,F,all", "auto"),
                "scheme": ("choice:auto,euler,rk4", "auto")},
    "predict": {"init_index": ("intlist?", None), "steps": ("int", 1000),
                "n_ens": ("int", 1), "perturbation_sd": ("float", 0.0)},
    "evaluate": {"stats": ("strlist", ["acf", "pdf"]), "max_lag": ("int", 100),
                 "n_bins": ("int", 50), "horizon": ("float?", None),
                 "rank_n_ens": ("int", 9), "rank_lead": ("float", 2.0),
                 "rank_sd": ("float", 0.15), "rank_cases": ("int", 100),
                 "rank_tally": ("choice:all,lead", "all")},
    "oracle": {"m_list": ("intlist?", [1, 10, 50]), "n_omega": ("int", 1024),
               "max_lag_time": ("float", 5.0)},
    "paths": {"dataset": ("str", "dataset.csv"), "truth": ("str?", None),
              "model": ("str", "model"), "forecasts": ("str", "forecasts"),
              "evaluation": ("str", "evaluation"), "oracle": ("str", "oracle")},
}

KNOWN_STATS = ("acf", "ccf", "pdf", "wave", "rmse_ancr", "sup_error", "rank_histogram")


class ConfigError(ValueError):
    def __init__(self, key, msg, line=None):
        where = f"[{key}]" + (f" (line {line})" if line else "")
        super().__init__(f"config error at {where}: {msg}")
        self.key = key
        self.line = line


class UsageError(ValueError):
    pass


class InputError(OSError):
    """Unreadable input, tagged with the config key that points at it."""

    def __init__(self, key, err):
        super().__init__(f"[{key}] {err}")
        self.key = key


def _line_index(text):
    """``(section, key) -> line number`` for error messages."""
    idx, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            idx[(section, None)] = no
        elif section is not None:
            for sep in "=:":
                if sep in s:
                    idx[(section, s.split(sep, 1)[0].strip())] = no
                    break
    return idx


def _convert(kind, raw, key, line):
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        if optional:
            return None
        raise ConfigError(key, "value required", line)
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "str":
            return raw
        if kind == "intlist":
            return [int(v) for v in raw.replace(",", " ").split()]
        if kind == "strlist":
            return [v.strip() for v in raw.split(",") if v.strip()]
        if kind.startswith("choice:"):
            choices = kind.split(":", 1)[1].split(",")
            if raw not in choices:
                raise ConfigError(key, f"{raw!r} is not one of {', '.join(choices)}", line)
            return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}", line) from None
    raise AssertionError(kind)


class ExperimentConfig:
    """Validated configuration; ``cfg[section][key]`` gives typed values."""

    def __init__(self, values, text, path=None):
        self.values = values
        self.text = text
        self.path = path

    def __getitem__(self, section):
        return self.values[section]

    @property
    def sha256(self):
        canon = json.dumps(self.values, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path=None, text=None, seed=None):
    """Parse and validate an INI config; ``seed`` overrides ``[run] seed``."""
    if text is None:
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise UsageError(f"cannot read config {path}: {err}") from err
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(getattr(err, "section", None) or "config",
                          str(err).splitlines()[0], getattr(err, "lineno", None)) from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section", lines.get((section, None)))
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key", lines.get((section, key)))
    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (kind, default) in keys.items():
            dotted = f"{section}.{key}"
            if cp.has_option(section, key):
                values[section][key] = _convert(kind, cp[section][key], dotted,
                                                lines.get((section, key)))
            elif default is REQUIRED:
                if section == "run" and key == "seed" and seed is not None:
                    values[section][key] = None
                    continue
                raise ConfigError(dotted, "missing required key", lines.get((section, None)))
            else:
                values[section][key] = default
    if seed is not None:
        values["run"]["seed"] = int(seed)
    _validate(values, lines)
    return ExperimentConfig(values, text, path)


def _validate(v, lines):
    def fail(section, key, msg):
        raise ConfigError(f"{section}.{key}", msg, lines.get((section, key)))

    if v["run"]["seed"] < 0:
        fail("run", "seed", "must be non-negative")
    if v["run"]["threads"] < 1:
        fail("run", "threads", "must be >= 1")
    s = v["system"]
    if not s["T"] > 0:
        fail("system", "T", "must be positive")
    if not s["tau"] > 0:
        fail("system", "tau", "must be positive")
    if v["delay"]["m"] < -1:
        fail("delay", "m", "must be >= -1")
    if v["delay"]["n"] < 0:
        fail("delay", "n", "must be >= 0")
    if v["delay"]["m"] == -1 and v["delay"]["n"] == 0:
        fail("delay", "m", "m = -1 requires n >= 1")
    if v["basis"]["degree"] < 0:
        fail("basis", "degree", "must be >= 0")
    if v["closure"]["substeps"] < 1:
        fail("closure", "substeps", "must be >= 1")
    if v["predict"]["steps"] < 1:
        fail("predict", "steps", "must be >= 1")
    if v["predict"]["n_ens"] < 1:
        fail("predict", "n_ens", "must be >= 1")
    if v["predict"]["perturbation_sd"] < 0:
        fail("predict", "perturbation_sd", "must be >= 0")
    for st in v["evaluate"]["stats"]:
        if st not in KNOWN_STATS:
            fail("evaluate", "stats", f"unknown statistic {st!r} (known: {', '.join(KNOWN_STATS)})")
    try:
        system_params(v)
    except ValueError as err:
        fail("system", "name", f"invalid parameters: {err}")


# --------------------------------------------------------------------------
# system plumbing

def system_params(v):
    s = v["system"]
    if s["name"] == "linear_gaussian":
        return lg.LinearGaussianParams(s["a11"], s["a12"], s["a21"], s["a22"],
                                       1.0 if s["eps"] is None else s["eps"],
                                       s["sigma_x"], s["sigma_y"])
    if s["name"] == "l96":
        kw = {} if s["eps"] is None else {"eps": s["eps"]}
        return l96_mod.L96Params(s["K"], s["J"], s["F"], s["h_x"], s["h_y"], **kw)
    kw = {} if s["dt"] is None else {"dt": s["dt"]}
    return tbh_mod.TBHParams(s["Lambda"], s["beta"], **kw)


def _x_columns(name):
    return list(tbh_mod.X_NAMES) if name == "tbh" else None


def _rng(seed, stage):
    return np.random.default_rng(np.random.SeedSequence([int(seed), stage]))


def _resolve(out, p):
    p = Path(p)
    return p if p.is_absolute() else out / p


def _read_dataset(cfg, out, key):
    if cfg["paths"][key] is None:
        key = "dataset"
    path = _resolve(out, cfg["paths"][key])
    try:
        return read_csv(path, _x_columns(cfg["system"]["name"]))
    except (OSError, DataError) as err:
        raise InputError(f"paths.{key}", err) from err


def _load_model(cfg, out):
    try:
        return load_bundle(_resolve(out, cfg["paths"]["model"]))
    except BundleError as err:
        raise InputError("paths.model", err) from err


def _components(cfg, n_x, n_y):
    layout = cfg["estimator"]["layout"]
    name = cfg["system"]["name"]
    if layout == "auto":
        layout = {"linear_gaussian": "joint", "l96": "per_k", "tbh": "tbh"}[name]
    if layout == "joint":
        return None
    if layout == "per_k":
        if n_x != n_y:
            raise ConfigError("estimator.layout", "per_k needs as many x as y columns")
        return l96_mod.per_k_components(n_x, cfg["estimator"]["neighbors"])
    if (n_x, n_y) != (2, 4):
        raise ConfigError("estimator.layout", "tbh layout needs the 2+4 TBH columns")
    return list(tbh_mod.TBH_COMPONENTS)


def build_closure(cfg, estimator, extra):
    """Closure model for the configured system around a fitted estimator."""
    s = cfg["system"]
    p = system_params(cfg.values)
    tau = float(extra["tau"])
    bound = 1e6 * float(extra["x_max"])
    sub = cfg["closure"]["substeps"]
    mode = cfg["closure"]["residual_noise"]
    if s["name"] == "tbh":
        return tbh_mod.tbh_closure(estimator, tau, sub,
                                   "F" if mode == "auto" else ("none" if mode == "off" else mode),
                                   bound=bound)
    R = estimator.residual_cov if mode == "all" else None
    if s["name"] == "linear_gaussian":
        return ClosureModel(lambda x, y: p.a11 * x + p.a12 * y, estimator, tau, sub,
                            diffusion=[[p.sigma_x]], residual_noise=R,
                            scheme=cfg["closure"]["scheme"], bound=bound)
    scheme = cfg["closure"]["scheme"]
    if R is not None and scheme == "auto":
        scheme = "rk4"
    return ClosureModel(lambda x, b: l96_mod.l96_slow_tendency(x, b, p.F), estimator, tau,
                        sub, residual_noise=R, scheme=scheme, bound=bound)


# --------------------------------------------------------------------------
# manifest

def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out, command, cfg, outputs):
    files = {}
    for f in sorted(set(outputs)):
        f = Path(f)
        for g in ([f] if f.is_file() else sorted(x for x in f.rglob("*") if x.is_file())):
            files[str(g.relative_to(out))] = _file_digest(g)
    manifest = {
        "command": command,
        "config_sha256": cfg.sha256,
        "seed": cfg["run"]["seed"],
        "versions": {"rkhs_closure": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "outputs": files,
    }
    path = out / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------------
# commands

def cmd_generate(cfg, out, threads=1):
    """Simulate the configured reference system into ``paths.dataset``."""
    s = cfg["system"]
    p = system_params(cfg.values)
    rng = _rng(cfg["run"]["seed"], 0)
    if s["name"] == "linear_gaussian":
        ds = lg.simulate_linear_gaussian(p, s["T"], s["dt"], rng, s["tau"],
                                         burn_in=10.0 if s["burn_in"] is None else s["burn_in"])
    elif s["name"] == "l96":
        ds = l96_mod.simulate_l96(p, s["T"], 1e-3 if s["dt"] is None else s["dt"], s["tau"], rng,
                                  burn_in=10.0 if s["burn_in"] is None else s["burn_in"])
    else:
        u0 = tbh_mod.tbh_initial_condition(p, rng)
        ds = tbh_mod.simulate_tbh(p, u0, s["T"], s["tau"],
                                  burn_in=100.0 if s["burn_in"] is None else s["burn_in"])
    path = _resolve(out, cfg["paths"]["dataset"])
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, path)
    return [path]


def cmd_train(cfg, out, threads=1):
    """Fit the delay estimator(s) on ``paths.dataset`` into the ``paths.model`` bundle."""
    ds = _read_dataset(cfg, out, "dataset")
    delay = DelayConfig(cfg["delay"]["m"], cfg["delay"]["n"])
    b = cfg["basis"]
    basis = BasisSpec(b["kind"], b["degree"], b["per_dim_cap"], b["L"], b["energy"])
    est = fit_delay_estimator(ds, delay, basis, cfg["estimator"]["lambda"],
                              _components(cfg, ds.n_x, ds.n_y), threads=threads,
                              store_weights=False)
    extra = {"system": cfg["system"], "tau": ds.tau, "x_max": float(np.abs(ds.x).max()),
             "x_names": list(ds.x_names), "y_names": list(ds.y_names)}
    path = save_bundle(est, _resolve(out, cfg["paths"]["model"]), extra)
    return [path]


def _default_inits(cfg, ds, delay, steps):
    lo, hi = delay.lag, ds.N - 1 - steps
    if hi < lo:
        raise ConfigError("predict.steps", f"dataset of {ds.N} rows too short for {steps} steps")
    return [lo]


def cmd_predict(cfg, out, threads=1):
    """Run closure ensembles from truth states; one CSV per case and member."""
    est, extra = _load_model(cfg, out)
    truth = _read_dataset(cfg, out, "truth")
    model = build_closure(cfg, est, extra)
    pr = cfg["predict"]
    steps = pr["steps"]
    inits = pr["init_index"] or _default_inits(cfg, truth, est.delay, steps)
    for i in inits:
        if i < est.delay.lag or i >= truth.N:
            raise ConfigError("predict.init_index",
                              f"index {i} outside [{est.delay.lag}, {truth.N - 1}]")
    x, y = ensemble_simulate(model, truth, np.array(inits), pr["n_ens"], steps,
                             pr["perturbation_sd"], cfg["run"]["seed"], return_y=True)
    fdir = _resolve(out, cfg["paths"]["forecasts"])
    fdir.mkdir(parents=True, exist_ok=True)
    files = []
    for c, i in enumerate(inits):
        row = []
        for e in range(pr["n_ens"]):
            yy = np.vstack([y[c, e], np.full((1, y.shape[-1]), np.nan)])
            ds = TimeSeriesDataset(truth.tau, x[c, e], yy, truth.t0 + i * truth.tau,
                                   truth.x_names, truth.y_names)
            name = f"trajectory_c{c:03d}_e{e:02d}.csv"
            write_csv(ds, fdir / name)
            row.append(name)
        files.append(row)
    index = {"init_index": list(map(int, inits)), "n_ens": pr["n_ens"], "steps": steps,
             "tau": truth.tau, "files": files}
    (fdir / "forecasts.json").write_text(json.dumps(index, indent=2) + "\n")
    return [fdir]


def _load_forecasts(cfg, out):
    fdir = _resolve(out, cfg["paths"]["forecasts"])
    idx_path = fdir / "forecasts.json"
    if not idx_path.is_file():
        raise UsageError(
            "evaluate needs forecasts: run `predict` first or set paths.forecasts to a "
            f"directory containing forecasts.json (looked in {fdir}); "
            "required inputs: truth dataset (paths.truth or paths.dataset), "
            "forecasts (paths.forecasts)")
    index = json.loads(idx_path.read_text())
    xcols = _x_columns(cfg["system"]["name"])
    x = np.array([[read_csv(fdir / f, xcols).x for f in row] for row in index["files"]])
    return index, x


def cmd_evaluate(cfg, out, threads=1):
    """Statistics of forecasts against truth, one CSV per curve plus ``summary.json``."""
    ev = cfg["evaluate"]
    stats = ev["stats"]
    needs_fc = [s for s in stats if s != "rank_histogram"]
    truth_key = "truth" if cfg["paths"]["truth"] else "dataset"
    required = {f"paths.{truth_key}": _resolve(out, cfg["paths"][truth_key])}
    if needs_fc:
        required["paths.forecasts"] = _resolve(out, cfg["paths"]["forecasts"]) / "forecasts.json"
    if "rank_histogram" in stats:
        required["paths.model"] = _resolve(out, cfg["paths"]["model"]) / "bundle.json"
    missing = [f"{k} ({p})" for k, p in required.items() if not p.is_file()]
    if missing:
        raise UsageError("evaluate is missing required inputs: " + "; ".join(missing)
                         + ". Required: truth dataset (generate), forecasts (predict)"
                         + (", model bundle (train)" if "rank_histogram" in stats else ""))
    truth = _read_dataset(cfg, out, "truth")
    index, fx = _load_forecasts(cfg, out) if needs_fc else (None, None)
    edir = _resolve(out, cfg["paths"]["evaluation"])
    edir.mkdir(parents=True, exist_ok=True)
    summary = {}
    tau = truth.tau
    if fx is not None:
        members = fx.reshape((-1,) + fx.shape[2:])      # (cases*ens, steps+1, n_x)
        max_lag = min(ev["max_lag"], members.shape[1] - 1)
    if "acf" in stats:
        a_t = acf(truth.x, max_lag, tau=tau)
        a_f = [acf(m, max_lag, tau=tau).values for m in members]
        a_t.to_csv(edir / "acf_truth.csv", "lag")
        a_fc = type(a_t)(a_t.abscissa, np.mean(a_f, axis=0), name="acf")
        a_fc.to_csv(edir / "acf_forecast.csv", "lag")
        summary["acf_max_abs_diff"] = float(np.max(np.abs(a_t.values - a_fc.values)))
    if "ccf" in stats and truth.n_x > 1:
        c_t = ccf(truth.x, np.roll(truth.x, -1, axis=1), max_lag, tau=tau)
        c_f = np.mean([ccf(m, np.roll(m, -1, axis=1), max_lag, tau=tau).values
                       for m in members], axis=0)
        c_t.to_csv(edir / "ccf_truth.csv", "lag")
        type(c_t)(c_t.abscissa, c_f, name="ccf").to_csv(edir / "ccf_forecast.csv", "lag")
    if "pdf" in stats:
        lo = min(truth.x.min(), members.min())
        hi = max(truth.x.max(), members.max())
        pdf_estimate(truth.x, ev["n_bins"], (lo, hi)).to_csv(edir / "pdf_truth.csv", "bin_center")
        pdf_estimate(members, ev["n_bins"], (lo, hi)).to_csv(edir / "pdf_forecast.csv", "bin_center")
        summary["pdf_l1"] = pdf_l1_distance(truth.x, members, ev["n_bins"], (lo, hi))
    if "wave" in stats and truth.n_x > 1:
        for label, X in (("truth", truth.x), ("forecast", members.reshape(-1, truth.n_x))):
            w = wave_statistics(X, k_axis=1)
            np.savetxt(edir / f"wave_{label}.csv",
                       np.column_stack([w.wavenumber, w.mean_amplitude, w.variance]),
                       delimiter=",", header="m,mean_amplitude,variance", comments="",
                       fmt="%.17g")
    if "rmse_ancr" in stats or "sup_error" in stats:
        inits = np.array(index["init_index"])
        n_t = fx.shape[2]
        if np.any(inits + n_t > truth.N):
            raise UsageError("forecast windows extend beyond the truth record")
        tw = truth.x[inits[:, None] + np.arange(n_t)]
        if "rmse_ancr" in stats:
            r, a = rmse_ancr(tw, fx, tau=tau)
            r.to_csv(edir / "rmse.csv", "lead")
            a.to_csv(edir / "ancr.csv", "lead")
        if "sup_error" in stats:
            full = np.repeat(tw[:, None], fx.shape[1], axis=1).reshape((-1,) + tw.shape[1:])
            val = sup_error(np.moveaxis(full, 0, 1), np.moveaxis(members, 0, 1), tau,
                            ev["horizon"])
            summary["sup_error"] = val
            np.savetxt(edir / "sup_error.csv", [[val]], header="E_sup", comments="", fmt="%.17g")
    if "rank_histogram" in stats:
        est, extra = _load_model(cfg, out)
        model = build_closure(cfg, est, extra)
        counts = rank_histogram(truth, model, ev["rank_n_ens"], ev["rank_lead"], ev["rank_sd"],
                                ev["rank_cases"], rng=cfg["run"]["seed"], tally=ev["rank_tally"])
        np.savetxt(edir / "rank_histogram.csv",
                   np.column_stack([np.arange(counts.size), counts]), delimiter=",",
                   header="rank,count", comments="", fmt="%d")
        summary["rank_histogram_pvalue"] = rank_histogram_pvalue(counts)
    (edir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [edir]


def cmd_oracle(cfg, out, threads=1):
    """Analytic linear Gaussian oracles: Lyapunov covariance, ACV, spectra, weights."""
    if cfg["system"]["name"] != "linear_gaussian":
        raise ConfigError("system.name", "oracle is only available for linear_gaussian")
    p = system_params(cfg.values)
    tau = cfg["system"]["tau"]
    odir = _resolve(out, cfg["paths"]["oracle"])
    odir.mkdir(parents=True, exist_ok=True)
    fmt = "%.17g"
    S = lg.lyapunov_equilibrium_cov(p)
    np.savetxt(odir / "lyapunov_S.csv", S, delimiter=",", fmt=fmt)
    np.savetxt(odir / "coefficients.csv",
               [[lg.averaged_coefficient(p), lg.rkhs_markov_coefficient(p)]], delimiter=",",
               header="averaged,rkhs_markov", comments="", fmt=fmt)
    lags = tau * np.arange(int(round(cfg["oracle"]["max_lag_time"] / tau)) + 1)
    np.savetxt(odir / "analytic_acv.csv", np.column_stack([lags, lg.analytic_acv_linear(p, lags)]),
               delimiter=",", header="lag,acv", comments="", fmt=fmt)
    w = default_omega_grid(tau, cfg["oracle"]["n_omega"])
    write_spectrum_csv(odir / "spectrum_full.csv", w, analytic_spectrum_full(p, w))
    write_spectrum_csv(odir / "spectrum_closure_limit.csv", w, closure_spectrum_limit(p, w))
    rows = []
    for m in cfg["oracle"]["m_list"] or []:
        lg_lags = tau * np.arange(m + 1)
        gxx = lg.analytic_acv_linear(p, lg_lags)
        gxy = lg.analytic_cross_cov(p, lg_lags)
        rows.append([m, verify_convolution_identity(analytic_memory_weights(p, m, tau), gxx, gxy)])
    np.savetxt(odir / "convolution_residual.csv", np.array(rows).reshape(-1, 2), delimiter=",",
               header="m,max_residual", comments="", fmt=fmt)
    return [odir]


# config keys most likely responsible for a numerical failure of each command
NUMERICAL_KEYS = {"generate": "system.dt", "train": "estimator.lambda",
                  "predict": "closure.substeps", "evaluate": "closure.substeps",
                  "oracle": "system.eps"}

COMMANDS = {"generate": cmd_generate, "train": cmd_train, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "oracle": cmd_oracle}


def build_parser():
    ap = argparse.ArgumentParser(prog="rkhs-closure", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        sp.add_argument("--config", required=True, help="INI experiment config")
        sp.add_argument("--seed", type=int, help="override [run] seed")
        sp.add_argument("--out", help="output directory (default: [run] out beside the config)")
        sp.add_argument("--threads", type=int, help="worker threads for estimator fits")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
        out = Path(args.out) if args.out else _resolve(Path(args.config).resolve().parent,
                                                        cfg["run"]["out"])
        threads = args.threads or cfg["run"]["threads"]
        if threads < 1:
            raise ConfigError("run.threads", "must be >= 1")
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, out, threads)
        write_manifest(out, args.command, cfg, outputs)
    except (ConfigError, UsageError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, l96_mod.DivergenceError, tbh_mod.TBHConsistencyError,
            EmbeddingError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"numerical error [{NUMERICAL_KEYS[args.command]}]: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except InputError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (OSError, DataError, BundleError) as err:
        print(f"I/O error [run.out]: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
