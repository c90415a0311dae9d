"""
Batch experiment driver.

    einselect <scenario> [--preset NAME] [--config FILE] [--seed U64] [--out DIR]
              [--jobs N] [--emit-plots] [--<param> VALUE ...]
    einselect list

Extra ``--key value`` pairs override entries of the parameter block; dotted
keys reach nested objects (``--grid.n_x 256``) and comma-separated values
become lists (``--m 1,2``). Precedence, lowest first: scenario defaults,
preset, config file, command line. EINSELECT_OUT overrides the output
directory.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import shutil
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, EinselectError, NumericalError, StateError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
U64_MAX = 2 ** 64 - 1


# ---------------------------------------------------------------------------
# schema helpers


def _num(default=None, **kw) -> dict:
    s = {"type": "number", **kw}
    if default is not None:
        s["default"] = default
    return s


def _int(default=None, **kw) -> dict:
    s = {"type": "integer", **kw}
    if default is not None:
        s["default"] = default
    return s


def _obj(props: dict, required=(), **kw) -> dict:
    s = {"type": "object", "properties": props, "additionalProperties": False, **kw}
    if required:
        s["required"] = list(required)
    return s


def _pos(default) -> dict:
    return _num(default, exclusiveMinimum=0)


def _qbm_props(gamma0, Gamma, T) -> dict:
    return {"gamma0": _pos(gamma0), "Gamma": _pos(Gamma), "T": _num(T, minimum=0), "M": _pos(1.0),
            "Omega": _num(1.0, minimum=0), "hbar": _pos(1.0), "kB": _pos(1.0)}


def fill_defaults(schema: dict, value):
    """Copy of ``value`` with schema defaults filled in, recursing into objects."""
    if schema.get("type") != "object" or not isinstance(value, dict):
        return value
    out = dict(value)
    for key, sub in schema.get("properties", {}).items():
        if key not in out and "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
        if key in out:
            out[key] = fill_defaults(sub, out[key])
    return out


def default_params(schema: dict) -> dict:
    return fill_defaults(schema, {})


CONFIG_SCHEMA = _obj({
    "scenario": {"type": "string"},
    "params": {"type": "object"},
    "seed": _int(0, minimum=0, maximum=U64_MAX),
    "out": {"type": "string"},
    "jobs": _int(1, minimum=1),
    "emit_plots": {"type": "boolean", "default": False},
}, required=("scenario",))


# ---------------------------------------------------------------------------
# run context


class RunContext:
    """Collects outputs in a staging directory."""

    def __init__(self, root: Path, rng: np.random.Generator, jobs: int, emit_plots: bool):
        self.root = root
        self.rng = rng
        self.jobs = jobs
        self.emit_plots = emit_plots

    def path(self, name: str) -> Path:
        return self.root / name

    def write_csv(self, name: str, columns, rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _plain(r[k]) for k in columns})

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")

    def plot(self, fn: Callable, name: str, *args, **kw) -> None:
        if self.emit_plots:
            fn(*args, path=self.path(name), **kw)


def _plain(v):
    """JSON-friendly copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return v


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    params: dict
    summary: dict
    runner: Callable[[dict, RunContext], dict]


SCENARIOS: dict[str, Scenario] = {}


def scenario(name: str, description: str, params: dict, summary: dict):
    def deco(fn):
        SCENARIOS[name] = Scenario(name, description, params, summary, fn)
        return fn
    return deco


# ---------------------------------------------------------------------------
# scenarios


SPINBATH_COLUMNS = ("t", "re_r", "im_r", "abs_r2", "bloch_x", "bloch_y", "bloch_z")


@scenario(
    "spinbath-decay",
    "Decoherence factor of a qubit coupled to a random spin bath.",
    _obj({
        "n_spins": _int(10, minimum=1, maximum=24),
        "g0": _pos(1.0),
        "a2": _num(0.5, minimum=0, maximum=1),
        "n_baths": _int(1, minimum=1, maximum=1000),
        "t_max": _pos(50.0),
        "n_times": _int(2001, minimum=2),
    }),
    _obj({
        "baths": {"type": "array", "items": _obj({
            "bath": {"type": "integer"}, "time_average_r2": {"type": "number"},
            "predicted_r2": {"type": "number"}, "bound": {"type": "number"}})},
    }, required=("baths",)),
)
def _run_spinbath(p: dict, ctx: RunContext) -> dict:
    from . import plotting, spinbath

    a, b = math.sqrt(p["a2"]), math.sqrt(1 - p["a2"])
    t = np.linspace(0.0, p["t_max"], p["n_times"])
    rows, out, curves = [], [], {}
    for k in range(p["n_baths"]):
        bath = spinbath.random_bath(p["n_spins"], ctx.rng, p["g0"], (a, b))
        r = spinbath.decoherence_factor(bath, t)
        bloch = spinbath.bloch_array(spinbath.bloch_trajectory(bath, t))
        for ti, ri, (bx, by, bz) in zip(t, r, bloch):
            rows.append({"bath": k, "t": ti, "re_r": ri.real, "im_r": ri.imag, "abs_r2": abs(ri) ** 2,
                         "bloch_x": bx, "bloch_y": by, "bloch_z": bz})
        bound, pred = spinbath.asymptotic_coherence(bath)
        avg = spinbath.time_average_r2(bath, p["t_max"] / 100, 100 * p["t_max"])
        out.append({"bath": k, "time_average_r2": avg, "predicted_r2": pred, "bound": bound})
        if k < 4:
            curves[f"bath {k}"] = np.abs(r) ** 2
    ctx.write_csv("decay.csv", ("bath",) + SPINBATH_COLUMNS, rows)
    ctx.plot(plotting.lines, "decay.svg", t, curves, ylabel="|r(t)|^2", logy=True)
    return {"baths": out}


@scenario(
    "qbm-coefficients",
    "Time-dependent master-equation coefficients for an ohmic bath.",
    _obj({**_qbm_props(0.05, 100.0, 10.0), "t_max": _pos(0.2), "n_times": _int(101, minimum=2)}),
    _obj({k: {"type": ["number", "null"]} for k in (
        "gamma_inf", "D_inf", "gamma_final", "D_final", "rel_err_gamma", "rel_err_D", "t_final")}),
)
def _run_qbm_coefficients(p: dict, ctx: RunContext) -> dict:
    from . import plotting, qbm

    params = qbm.QbmParams(**{k: p[k] for k in ("gamma0", "Gamma", "T", "M", "Omega", "hbar", "kB")})
    t = np.linspace(0.0, p["t_max"], p["n_times"])
    tr = qbm.coefficients_perturbative(params, t)
    cols = ("t", "gamma", "D", "f", "Omega_ren_sq")
    ctx.write_csv("coefficients.csv", cols,
                  [dict(zip(cols, vals)) for vals in zip(tr.t, tr.gamma, tr.D, tr.f, tr.Omega_ren_sq)])
    g_inf, D_inf = params.gamma_inf, params.D_inf
    ctx.plot(plotting.lines, "coefficients.svg", t * params.Gamma,
             {"gamma / gamma_inf": tr.gamma / g_inf, "D / D_inf": tr.D / D_inf}, xlabel="Gamma t")
    return {"gamma_inf": g_inf, "D_inf": D_inf, "gamma_final": tr.gamma[-1], "D_final": tr.D[-1],
            "rel_err_gamma": abs(tr.gamma[-1] / g_inf - 1), "rel_err_D": abs(tr.D[-1] / D_inf - 1),
            "t_final": t[-1]}


@scenario(
    "qbm-cat",
    "Decay of the interference terms of a position cat under high-temperature Brownian motion.",
    _obj({
        **_qbm_props(0.01, 1000.0, 100.0),
        "separation": _pos(6.0),
        "sigma": _pos(0.5),
        "n_points": _int(256, minimum=16),
        "x_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2,
                    "default": [-8.0, 8.0]},
        "dt": _pos(1e-3),
        "steps": _int(50, minimum=2),
    }),
    _obj({k: {"type": "number"} for k in ("measured_rate", "predicted_rate", "lambda_T", "tau_D")}),
)
def _run_qbm_cat(p: dict, ctx: RunContext) -> dict:
    from . import plotting, qbm

    params = qbm.QbmParams(**{k: p[k] for k in ("gamma0", "Gamma", "T", "M", "Omega", "hbar", "kB")})
    lo, hi = p["x_range"]
    n = p["n_points"]
    x = lo + (hi - lo) / n * np.arange(n)
    x0 = p["separation"] / 2
    psi = qbm.cat_wavefunction(x, x0, p["sigma"], p["hbar"])
    st = qbm.PositionGridState.from_wavefunction(psi, lo, hi, qbm.harmonic(p["M"], p["Omega"]))
    i, j = int(np.argmin(abs(x - x0))), int(np.argmin(abs(x + x0)))
    rows = []

    def record(_, s):
        rows.append({"t": s.t, "coherence": abs(s.rho[i, j]), "trace": s.trace()})

    record(None, st)
    qbm.high_t_evolve(st, params, p["dt"], p["steps"], callback=record)
    ctx.write_csv("cat.csv", ("t", "coherence", "trace"), rows)
    t = np.array([r["t"] for r in rows])
    c = np.array([r["coherence"] for r in rows])
    # fit only above the round-off floor
    sel = np.cumprod(c > 1e-10 * c[0]).astype(bool)
    if sel.sum() < 2:
        raise NumericalError("interference term vanished within one step; shorten dt")
    rate = -np.polyfit(t[sel], np.log(c[sel]), 1)[0]
    dec = qbm.decoherence_time(params, x[i] - x[j])
    ctx.plot(plotting.lines, "cat.svg", t, {"|rho(x0, -x0)|": c}, logy=True)
    return {"measured_rate": rate, "predicted_rate": 1 / dec.tau_D, "lambda_T": dec.lambda_T,
            "tau_D": dec.tau_D}


_POTENTIAL_KEYS = {
    "harmonic": {"M", "Omega"},
    "driven_pendulum": {"kappa", "l", "a", "w"},
    "driven_double_well": {"A", "B", "C", "f"},
    "custom": {"poly", "cos", "drive"},
}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}


@scenario(
    "wigner-chaos",
    "Wigner-function evolution in a driven potential with momentum diffusion (presets fig1, fig8).",
    _obj({
        "potential": _obj({"kind": {"enum": sorted(_POTENTIAL_KEYS)}, "params": {"type": "object"}},
                          required=("kind", "params"),
                          default={"kind": "driven_double_well",
                                   "params": {"A": 0.5, "B": 10, "C": 10, "f": 6.07}}),
        "mass": _pos(1.0),
        "hbar": _pos(0.1),
        "D": _num(0.025, minimum=0),
        "lyapunov": _pos(0.45),
        "chi": _pos(1.0),
        "grid": _obj({"n_x": _int(512, minimum=8), "n_p": _int(512, minimum=8),
                      "x_range": {**_PAIR, "default": [-6.5, 6.5]},
                      "p_range": {**_PAIR, "default": [-22.0, 22.0]}}, default={}),
        "initial": _obj({"x0": _num(-3.0), "p0": _num(8.0), "sigma_x": _pos(math.sqrt(0.05))}, default={}),
        "dt": _pos(0.005),
        "t_end": _pos(12.0),
        "trace_every": _int(20, minimum=1),
        "snapshots": {"type": "array", "items": {"type": "number", "minimum": 0}, "default": []},
        "modes": {"type": "array", "items": {"enum": ["moyal", "liouville"]}, "minItems": 1,
                  "uniqueItems": True, "default": ["moyal"]},
        "window": {"type": ["array", "null"], "items": {"type": "number"}, "minItems": 2, "maxItems": 2,
                   "default": None},
        "correction": {"type": "boolean", "default": True},
    }),
    _obj({
        "window": {"type": "array", "items": {"type": "number"}},
        "t_hbar": {"type": "number"},
        "ell_c": {"type": ["number", "null"]},
        "sigma_c": {"type": ["number", "null"]},
        "modes": {"type": "object", "additionalProperties": _obj({
            "rate": {"type": ["number", "null"]}, "final_purity": {"type": "number"},
            "final_t": {"type": "number"}, "trace": {"type": "string"},
            "snapshots": {"type": "array", "items": {"type": "string"}}})},
    }),
)
def _run_wigner_chaos(p: dict, ctx: RunContext) -> dict:
    from . import plotting, wigner

    pot_cfg = p["potential"]
    extra = set(pot_cfg["params"]) - _POTENTIAL_KEYS[pot_cfg["kind"]]
    if extra:
        raise ConfigError(f"unknown potential parameters {sorted(extra)}")
    pot = wigner.Potential.from_json(pot_cfg)
    g = p["grid"]
    grid0 = wigner.make_grid(g["n_x"], tuple(g["x_range"]), p["hbar"], g["n_p"], tuple(g["p_range"]),
                             pot, p["mass"])
    ini = p["initial"]
    grid0 = wigner.gaussian(grid0, ini["x0"], ini["p0"], ini["sigma_x"])
    dt, steps = p["dt"], int(round(p["t_end"] / p["dt"]))
    snap_steps = {int(round(s / dt)): s for s in p["snapshots"]}
    Delta_p0 = p["hbar"] / (2 * ini["sigma_x"])
    window = tuple(p["window"]) if p["window"] else wigner.default_window(
        p["lyapunov"], Delta_p0, p["chi"], p["hbar"])
    t_hbar = math.log(Delta_p0 * p["chi"] / p["hbar"]) / p["lyapunov"]

    def run_mode(mode):
        rows, snaps, k = [], [], [0]

        def cb(gr):
            if k[0] % p["trace_every"] == 0:
                rows.append({"t": gr.t, **wigner.observables(gr, with_correction=p["correction"])})
            if k[0] in snap_steps:
                stem = f"snapshot_{mode}_t{snap_steps[k[0]]:g}"
                wigner.write_snapshot(gr, ctx.path(stem))
                snaps.append(stem)
                ctx.plot(plotting.heatmap, f"wigner_{mode}_t{snap_steps[k[0]]:g}.svg", gr,
                         title=f"{mode}, t = {gr.t:.3g}")
            k[0] += 1

        final = wigner.evolve(grid0, mode, p["D"], dt, steps, callback=cb, every=1)
        return mode, rows, snaps, final

    with ThreadPoolExecutor(max_workers=min(ctx.jobs, len(p["modes"]))) as ex:
        results = list(ex.map(run_mode, p["modes"]))

    modes, series = {}, {}
    for mode, rows, snaps, final in results:
        name = f"trace_{mode}.csv"
        ctx.write_csv(name, wigner.TRACE_COLUMNS, rows)
        t = np.array([r["t"] for r in rows])
        pur = np.array([r["purity"] for r in rows])
        rate = None
        if window[1] <= t[-1] and window[0] >= t[0]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rate = wigner.entropy_production_rate(t, pur, window)
        modes[mode] = {"rate": rate, "final_purity": wigner.linear_entropy(final)[0], "final_t": final.t,
                       "trace": name, "snapshots": [s + ".bin" for s in snaps]}
        series[mode] = (t, pur, np.array([r["mean_x"] for r in rows]))
    if series:
        t0 = next(iter(series.values()))[0]
        ctx.plot(plotting.lines, "purity.svg", t0, {m: s[1] for m, s in series.items()},
                 ylabel="purity", logy=True)
        ctx.plot(plotting.lines, "mean_x.svg", t0, {m: s[2] for m, s in series.items()}, ylabel="<x>")
    ell_c, sigma_c = wigner.coherence_length(p["D"], p["lyapunov"], p["hbar"]) if p["D"] > 0 else (None, None)
    return {"window": list(window), "t_hbar": t_hbar, "ell_c": ell_c, "sigma_c": sigma_c, "modes": modes}


@scenario(
    "sieve-squeeze",
    "Predictability sieve over squeezed Gaussians of a damped oscillator.",
    _obj({**_qbm_props(1e-4, 100.0, 100.0), "k": _int(4, minimum=0, maximum=12),
          "score": {"enum": ["purity", "entropy"], "default": "purity"},
          "horizon": {"type": ["number", "null"], "exclusiveMinimum": 0, "default": None}}),
    _obj({"winners": {"type": "array", "items": {"type": "string"}}, "unique": {"type": "boolean"},
          "asymmetry": {"type": "number"}, "horizon": {"type": "number"}}),
)
def _run_sieve(p: dict, ctx: RunContext) -> dict:
    from . import plotting, qbm, sieve

    params = qbm.QbmParams(**{k: p[k] for k in ("gamma0", "Gamma", "T", "M", "Omega", "hbar", "kB")})
    s = sieve.squeeze_grid(p["k"])
    cands = [sieve.GaussianCandidate(v, M=p["M"], Omega=p["Omega"], hbar=p["hbar"]) for v in s]
    res = sieve.run_sieve(cands, sieve.QbmGaussianDynamics(params), p["horizon"], p["score"])
    bad = [r for r in res if r.disqualified]
    if len(bad) == len(res):
        raise NumericalError("every candidate failed")
    ctx.write_csv("sieve.csv", sieve.SIEVE_COLUMNS, sieve.sieve_rows(res))
    by_s = {r.candidate.s: r.score for r in res if not r.disqualified}
    scores = np.array([by_s[v] for v in s if v in by_s])
    span = float(np.ptp(scores)) or 1.0
    asym = max((abs(by_s[v] - by_s[1 / v]) / span for v in s if v in by_s and 1 / v in by_s), default=0.0)
    ctx.plot(plotting.lines, "sieve.svg", np.log([v for v in s if v in by_s]), {p["score"]: scores},
             xlabel="ln s", ylabel="score")
    win = sieve.winners(res)
    return {"winners": [r.label for r in win], "unique": len(win) == 1, "asymmetry": asym,
            "horizon": res[0].horizon}


@scenario(
    "darwinism-cnot",
    "Redundancy of system records as c-nots copy the pointer state into environment qubits.",
    _obj({"a2": _num(0.5, exclusiveMinimum=0, exclusiveMaximum=1), "phase": _num(0.0),
          "N": _int(4, minimum=1, maximum=20), "n_cnots": {"type": ["integer", "null"], "minimum": 0,
                                                        "default": None}}),
    _obj({"rows": {"type": "array", "items": _obj({k: {"type": "number"} for k in (
        "n_cnots", "R_I", "R_J_pointer", "R_J_conjugate")})}}),
)
def _run_darwinism(p: dict, ctx: RunContext) -> dict:
    from . import darwinism, plotting

    if p["n_cnots"] is not None and p["n_cnots"] > p["N"]:
        raise ConfigError("n_cnots cannot exceed N")
    a = math.sqrt(p["a2"])
    b = math.sqrt(1 - p["a2"]) * complex(math.cos(p["phase"]), math.sin(p["phase"]))
    rows = darwinism.cnot_sequence(a, b, p["N"], p["n_cnots"])
    cols = ("n_cnots", "R_I", "R_J_pointer", "R_J_conjugate")
    ctx.write_csv("cnot.csv", cols, rows)
    ctx.plot(plotting.lines, "cnot.svg", [r["n_cnots"] for r in rows],
             {k: [r[k] for r in rows] for k in cols[1:]}, xlabel="c-nots", ylabel="R")
    return {"rows": rows}


@scenario(
    "envariance-born",
    "Born probabilities from envariant swaps of a fine-grained state.",
    _obj({
        "m": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1, "default": [1, 1]},
        "route": {"enum": ["apparatus", "counterweight"], "default": "apparatus"},
        "alpha2": {"type": ["string", "number", "null"], "default": None},
        "ensemble_size": {"type": ["integer", "null"], "minimum": 1, "maximum": 1000, "default": None},
    }),
    _obj({
        "multiplicities": {"type": "array", "items": {"type": "integer"}},
        "M": {"type": "integer"},
        "probabilities": {"type": "array", "items": {"type": "string", "pattern": r"^\d+/\d+$"}},
        "frequency": _obj({"N": {"type": "integer"}, "alpha2": {"type": "string"},
                           "tail_0.1": {"type": "number"}, "total_variation": {"type": "number"}}),
    }, required=("probabilities",)),
)
def _run_envariance(p: dict, ctx: RunContext) -> dict:
    from . import envariance

    grain = envariance.FineGraining(tuple(p["m"]))
    if grain.M > 10 ** 4:
        raise ConfigError("total multiplicity is capped at 10^4")
    probs = envariance.born_from_finegraining(grain, p["route"])
    out = envariance.born_json(grain, probs)
    ctx.write_json("born.json", out)
    if p["ensemble_size"]:
        try:
            a2 = Fraction(str(p["alpha2"])) if p["alpha2"] is not None else probs[0]
        except ValueError as exc:
            raise ConfigError(f"alpha2: {exc}") from None
        dist = envariance.frequency_distribution(a2, p["ensemble_size"])
        ctx.write_csv("frequency.csv", ("n", "p_exact_num", "p_exact_den", "p_gauss"),
                      envariance.frequency_rows(dist))
        out = {**out, "frequency": {"N": dist.N, "alpha2": envariance.fraction_str(dist.alpha2),
                                    "tail_0.1": float(dist.tail(0.1)),
                                    "total_variation": dist.total_variation()}}
    return out


_DAYS_PER_YEAR = 365.25


@scenario(
    "scales-report",
    "Ehrenfest time, reversibility time, sub-Planck action and coherence length of a chaotic system.",
    _obj({"Lambda": _pos(1.0), "time_unit": {"type": "string", "default": "s"}, "I_action": _pos(1e6),
          "hbar": _pos(1.0), "Delta_p0": _pos(1.0), "chi": _pos(1.0), "gamma": _pos(1.0),
          "lambda_T": _pos(1.0), "note": {"type": "string", "default": ""}}),
    _obj({"t_hbar": {"type": "number"}, "t_r": {"type": "number"}, "sub_planck_a": {"type": "number"},
          "ell_c": {"type": "number"}, "sigma_c": {"type": "number"}, "time_unit": {"type": "string"},
          "t_r_years": {"type": ["number", "null"]}, "lines": {"type": "array", "items": {"type": "string"}}}),
)
def _run_scales(p: dict, ctx: RunContext) -> dict:
    from . import wigner

    rep = wigner.scale_report(p["Lambda"], p["Delta_p0"], p["chi"], p["I_action"], p["gamma"],
                              p["lambda_T"], p["hbar"])
    u = p["time_unit"]
    years = rep.t_r / _DAYS_PER_YEAR if u == "day" else None
    lines = [f"t_hbar = {rep.t_hbar:.6g} {u}",
             f"t_r = {rep.t_r:.6g} {u}" + (f" = {years:.4g} yr" if years is not None else ""),
             f"sub-Planck action a = {rep.sub_planck_a:.6g}",
             f"ell_c = {rep.ell_c:.6g}",
             f"sigma_c = {rep.sigma_c:.6g}"]
    if p["note"]:
        lines.append(f"note: {p['note']}")
    ctx.path("report.txt").write_text("\n".join(lines) + "\n")
    return {**rep._asdict(), "time_unit": u, "t_r_years": years, "lines": lines}


# ---------------------------------------------------------------------------
# configuration


def list_presets() -> list[str]:
    return sorted(f.name[:-5] for f in resources.files("einselect").joinpath("presets").iterdir()
                  if f.name.endswith(".json"))


def load_preset(name: str) -> dict:
    if name.endswith(".json") or os.sep in name:
        path = Path(name)
        if not path.is_file():
            raise ConfigError(f"preset file {name!r} not found")
        return _load_json(path)
    res = resources.files("einselect").joinpath("presets", f"{name}.json")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return json.loads(res.read_text())


def _load_json(path: Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return obj


def parse_value(text: str):
    """JSON literal, comma-separated list of literals, or bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [parse_value(t.strip()) for t in text.split(",") if t.strip()]
    return text


def parse_overrides(tokens: list[str]) -> dict:
    out: dict = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        key, eq, val = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(tokens) or tokens[i + 1].startswith("--"):
                raise ConfigError(f"missing value for --{key}")
            val = tokens[i + 1]
            i += 1
        i += 1
        node = out
        parts = key.replace("-", "_").split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parse_value(val)
    return out


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _coerce_lists(schema: dict, over: dict) -> dict:
    """Wrap scalar overrides where the schema expects an array (``--m 3``)."""
    props = schema.get("properties", {})
    out = {}
    for k, v in over.items():
        sub = props.get(k, {})
        types = sub.get("type")
        types = types if isinstance(types, list) else [types]
        if isinstance(v, dict):
            v = _coerce_lists(sub, v)
        elif "array" in types and not isinstance(v, list) and not (v is None and "null" in types):
            v = [v]
        out[k] = v
    return out


def _check(schema: dict, value, where: str) -> None:
    try:
        jsonschema.validate(value, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(x) for x in exc.absolute_path)
        raise ConfigError(f"{where}{'/' + loc if loc else ''}: {exc.message}") from None


def unknown_scenario(name: str) -> ConfigError:
    return ConfigError(f"unknown scenario {name!r}; available scenarios:\n  " + "\n  ".join(sorted(SCENARIOS)))


def resolve_config(scenario_name: str | None, preset: str | None = None, config: str | None = None,
                   overrides: dict | None = None, seed: int | None = None, out: str | None = None,
                   jobs: int | None = None, emit_plots: bool | None = None) -> dict:
    """Merge defaults, preset, config file and command line into a validated config."""
    layers = []
    if preset:
        layers.append(load_preset(preset))
    if config:
        layers.append(_load_json(Path(config)))
    for layer in layers:
        _check(CONFIG_SCHEMA, {"scenario": "", **layer}, "config")
    named = [layer["scenario"] for layer in layers if "scenario" in layer]
    name = scenario_name or (named[-1] if named else None)
    if name is None:
        raise ConfigError("no scenario given")
    if name not in SCENARIOS:
        raise unknown_scenario(name)
    for n in named:
        if n != name:
            raise ConfigError(f"config is for scenario {n!r}, not {name!r}")
    sc = SCENARIOS[name]
    cfg: dict = {"scenario": name, "params": {}}
    for layer in layers:
        cfg = _merge(cfg, layer)
    cfg["params"] = _merge(cfg.get("params", {}), _coerce_lists(sc.params, overrides or {}))
    for key, val in (("seed", seed), ("out", out), ("jobs", jobs)):
        if val is not None:
            cfg[key] = val
    if emit_plots:
        cfg["emit_plots"] = True
    if os.environ.get("EINSELECT_OUT"):
        cfg["out"] = os.environ["EINSELECT_OUT"]
    cfg.setdefault("out", str(Path("runs") / name))
    cfg = fill_defaults(CONFIG_SCHEMA, cfg)
    _check(CONFIG_SCHEMA, cfg, "config")
    cfg["params"] = fill_defaults(sc.params, cfg["params"])
    _check(sc.params, cfg["params"], f"{name} params")
    return cfg


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def execute(cfg: dict) -> dict:
    """
    Run a resolved config. Outputs are staged in a sibling temporary
    directory and moved into place only on success.

    Returns
    -------
    dict
        The scenario summary (also written to summary.json).
    """
    sc = SCENARIOS[cfg["scenario"]]
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    started = _now()
    try:
        ctx = RunContext(stage, np.random.default_rng(cfg["seed"]), cfg["jobs"], cfg["emit_plots"])
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            summary = _plain(sc.runner(cfg["params"], ctx))
        _check(sc.summary, summary, f"{sc.name} summary")
        ctx.write_json("summary.json", summary)
        ctx.write_json("config.json", {k: v for k, v in cfg.items() if k != "out"})
        out.mkdir(parents=True, exist_ok=True)
        names = sorted(f.name for f in stage.iterdir())
        files = []
        for name in names:
            files.append({"name": name, "sha256": _sha256(stage / name), "bytes": (stage / name).stat().st_size})
            os.replace(stage / name, out / name)
        manifest = {"config_sha256": config_hash(cfg), "version": __version__, "scenario": sc.name,
                    "started": started, "finished": _now(), "files": files}
        tmp = out / ".manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, out / "manifest.json")
        return summary
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def scenario_table() -> dict:
    return {name: {"description": sc.description, "params": sc.params, "summary": sc.summary,
                   "presets": [p for p in list_presets() if load_preset(p).get("scenario") == name]}
            for name, sc in sorted(SCENARIOS.items())}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="einselect", description="Decoherence and einselection experiments.",
                                 epilog="Scenarios: " + ", ".join(sorted(SCENARIOS)) + ". Use 'list' for schemas.")
    ap.add_argument("scenario", help="scenario name, 'list', or 'run' followed by a scenario")
    ap.add_argument("--preset")
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--emit-plots", action="store_true")
    ap.add_argument("--version", action="version", version=__version__)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["run"]:
        argv = argv[1:]
        if not argv or argv[0].startswith("--"):
            argv = ["run", *argv]  # scenario taken from the config
    try:
        args, rest = _parser().parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.scenario == "list":
        print(json.dumps(scenario_table(), indent=2))
        return EXIT_OK
    try:
        if args.seed is not None and not 0 <= args.seed <= U64_MAX:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg = resolve_config(None if args.scenario == "run" else args.scenario, args.preset, args.config,
                             parse_overrides(rest), args.seed, args.out, args.jobs, args.emit_plots)
        summary = execute(cfg)
    except (ConfigError, StateError, ValueError, TypeError) as exc:
        print(f"einselect: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError, EinselectError) as exc:
        print(f"einselect: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
