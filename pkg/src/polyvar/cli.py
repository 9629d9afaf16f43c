"""Command-line front end.

    polyvar periodic --config run.json [--out out.csv]
    polyvar mc       --config run.json [--seed N] [--threads N]
    polyvar oracle   --config run.json
    polyvar duality  --config run.json

Configs are JSON and validated against the schemas below; unknown keys are
rejected. Exit codes: 0 ok, 2 model error, 3 config error, 4 resource cap.
Every float is written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import legendre, maxplus, mc, oracles, pf
from .errors import CapExceeded, PolyvarError
from .periodic import build_quotient, load_environment, period_of_pattern
from .steps import Velocity

EXIT_OK, EXIT_MODEL, EXIT_CONFIG, EXIT_CAP = 0, 2, 3, 4

_NUM = {"type": "number"}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_BETA = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "inf"}]}

_ENV = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dimension", "period", "weights", "steps"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "period": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "weights": {"type": "array", "items": _NUM},
        "steps": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}},
                  "minItems": 1},
    },
}

SCHEMAS = {
    "periodic": {
        "type": "object",
        "additionalProperties": False,
        "required": ["environment", "h_grid"],
        "properties": {
            "environment": {"oneOf": [_ENV, {"type": "string"}]},
            "h_grid": {"type": "array", "items": {"type": "array", "items": _NUM}, "minItems": 1},
            "beta_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            "xi_grid": {"type": "array", "items": {"type": "array", "items": _NUM}},
            "n_max": {"type": "integer", "minimum": 4},
            "output": {"type": "string"},
        },
    },
    "mc": {
        "type": "object",
        "additionalProperties": False,
        "required": ["distribution", "beta", "estimator", "n", "replicas", "seed"],
        "properties": {
            "distribution": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": list(mc.KINDS)},
                    "shape": {"type": "number", "exclusiveMinimum": 0},
                    "p": {"type": "number", "minimum": 0, "maximum": 1},
                    "low": _NUM,
                    "high": _NUM,
                    "transform": {"enum": list(mc.TRANSFORMS)},
                },
            },
            "beta": _BETA,
            "estimator": {"enum": ["gpp", "busemann_pp", "busemann_pl"]},
            "xi_grid": {"type": "array", "items": _PAIR},
            "h_grid": {"type": "array", "items": _PAIR},
            "n": {"type": "integer", "minimum": 1},
            "replicas": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "starts": {"type": "integer", "minimum": 1},
            "output": {"type": "string"},
        },
    },
    "oracle": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model", "s_grid"],
        "properties": {
            "model": {"enum": ["rost", "loggamma"]},
            "rho": {"type": "number", "exclusiveMinimum": 0},
            "s_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                  "exclusiveMaximum": 1}, "minItems": 1},
            "output": {"type": "string"},
        },
    },
    "duality": {
        "type": "object",
        "additionalProperties": False,
        "required": ["model"],
        "properties": {
            "model": {"enum": ["rost", "loggamma"]},
            "rho": {"type": "number", "exclusiveMinimum": 0},
            "h_grid": {"type": "array", "items": _PAIR},
            "s_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                  "exclusiveMaximum": 1}},
            "grid_points": {"type": "integer", "minimum": legendre.MIN_POINTS},
            "h_box": _PAIR,
            "output": {"type": "string"},
        },
    },
}


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if isinstance(x, (tuple, list, np.ndarray)):
        return ";".join(fmt(v) for v in x)
    return str(x)


def _write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def load_config(path, command: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    try:
        jsonschema.validate(doc, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {exc.message}") from None
    return doc


def _beta(x) -> float:
    return math.inf if x == "inf" else float(x)


# -- periodic -----------------------------------------------------------------

PERIODIC_HEADER = ("record", "h", "beta", "xi", "quantity", "value")


def run_periodic(cfg: dict) -> list:
    env, steps = load_environment(cfg["environment"])
    q = build_quotient(env, steps)
    betas = cfg.get("beta_grid", [1.0])
    n_max = cfg.get("n_max", 400)
    rows = [("quotient", "", "", "", "states", q.m),
            ("quotient", "", "", "", "pattern_period", period_of_pattern(q.successor_sets()))]
    for h in cfg["h_grid"]:
        h = np.asarray(h, dtype=float)
        if h.shape != (steps.dimension,):
            raise ConfigError("config field h_grid: tilt has the wrong dimension")
        A = maxplus.build_maxplus_matrix(q, h)
        lam = maxplus.karp_eigenvalue(A)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            eig = maxplus.eigenvector_and_critical_graph(A, lam)
        t, _ = maxplus.minmax_via_difference_constraints(A)
        circ = maxplus.enumerate_circuits(A)
        rows += [
            ("maxplus", h, "inf", "", "lambda", lam),
            ("maxplus", h, "inf", "", "lambda_minmax", t),
            ("maxplus", h, "inf", "", "lambda_circuits", maxplus.measure_variational_value(circ)),
            ("maxplus", h, "inf", "", "cyclicity", eig.cyclicity),
            ("maxplus", h, "inf", "", "primitive", eig.primitive),
            ("maxplus", h, "inf", "", "sigma", eig.sigma),
            ("maxplus", h, "inf", "", "critical_states", eig.critical_nodes),
        ]
        for (w, k), rep in sorted(maxplus.busemann_maxplus(A, n_max=max(n_max, 2 * q.m), eig=eig).items()):
            tag = f"busemann[w={w},z={fmt(steps.steps[k])}]"
            if rep.converged:
                rows.append(("maxplus", h, "inf", "", tag + ".limit", rep.limit))
            else:
                rows.append(("maxplus", h, "inf", "", tag + ".period", rep.period or 0))
                rows.append(("maxplus", h, "inf", "", tag + ".values", rep.values))
        for b in betas:
            sol = pf.solve_pf(pf.build_transfer_matrix(q, h, b, log_domain=True))
            ent = pf.invariant_measure_and_entropy(sol)
            rows += [
                ("pf", h, b, "", "g_pl", sol.g_pl),
                ("pf", h, b, "", "log_rho", sol.log_rho),
                ("pf", h, b, "", "log_rev", sol.log_rev),
                ("pf", h, b, "", "log_lev", sol.log_lev),
                ("pf", h, b, "", "entropy", ent.entropy),
                ("pf", h, b, "", "identity_gap", ent.identity_gap),
            ]
        for xi in cfg.get("xi_grid", []):
            v = Velocity.from_xi(steps, xi)
            rows.append(("gpp", "", "inf", v.xi, "g_pp", maxplus.gpp_periodic(circ, v)))
    return rows


# -- mc -------------------------------------------------------------------------

def _mc_oracle(dist: mc.DistributionSpec, beta: float, estimator: str, param):
    """Closed-form value for the estimate, when one is known."""
    exp_lpp = dist.kind == "exponential" and dist.transform == "identity" and math.isinf(beta)
    lg = dist.kind in ("gamma", "exponential") and dist.transform == "neglog2" and beta == 1.0
    rho = dist.shape if dist.kind == "gamma" else 1.0
    if estimator == "gpp":
        s = float(param[0])
        if exp_lpp:
            return oracles.rost_gpp(s)
        if lg and 0 < s < 1:
            return oracles.loggamma_gpp(oracles.LogGammaModel(rho), s)
    elif estimator == "busemann_pp" and exp_lpp:
        return 1.0 / oracles.exp_alpha(float(param[0]))
    elif estimator == "busemann_pl":
        if exp_lpp:
            return legendre.legendre_pl_from_pp(oracles.rost_curve(), param)[0]
        if lg:
            return oracles.loggamma_gpl(oracles.LogGammaModel(rho), np.asarray(param, dtype=float))
    if dist.kind == "bernoulli" and dist.p == 1.0 and estimator == "gpp":
        return 1.0
    return None


def run_mc(cfg: dict, threads: int | None) -> list:
    dist = mc.DistributionSpec(**cfg["distribution"])
    beta = _beta(cfg["beta"])
    est_kind = cfg["estimator"]
    n, reps, seed = cfg["n"], cfg["replicas"], cfg["seed"]
    if n > mc.BOX_CAP:
        raise CapExceeded(f"n={n} exceeds the box cap {mc.BOX_CAP}")
    rows = []
    label = dist.label()
    if est_kind == "busemann_pl":
        grid = cfg.get("h_grid")
        if not grid:
            raise ConfigError("config field h_grid: required for busemann_pl")
        for h in grid:
            res = mc.estimate_busemann_pl(dist, beta, h, n, reps, seed,
                                          starts=cfg.get("starts", 1), threads=threads)
            orc = _mc_oracle(dist, beta, est_kind, h)
            for z, e in res.per_step.items():
                rows.append(mc.mc_row(f"{label}:B(0,{fmt(z)})", beta, np.asarray(h, float), n,
                                      reps, seed, e, orc))
        return rows
    grid = cfg.get("xi_grid")
    if not grid:
        raise ConfigError(f"config field xi_grid: required for {est_kind}")
    for xi in grid:
        xi = np.asarray(xi, dtype=float)
        if est_kind == "gpp":
            e = mc.estimate_gpp(dist, beta, xi, n, reps, seed, threads=threads)
            rows.append(mc.mc_row(label, beta, xi, n, reps, seed, e,
                                  _mc_oracle(dist, beta, est_kind, xi)))
        else:
            pairs = mc.staircase_pairs(cfg.get("starts", 1))
            res = mc.estimate_busemann_pp(dist, beta, xi, pairs, n, reps, seed, threads=threads)
            orc = _mc_oracle(dist, beta, est_kind, xi)
            for z, e in res.pooled.items():
                rows.append(mc.mc_row(f"{label}:B(x,x+e1)|z={fmt(z)}", beta, xi, n, reps, seed,
                                      e, orc))
    return rows


# -- oracle / duality --------------------------------------------------------------

ORACLE_HEADER = ("s", "g_pp", "theta_or_alpha", "h1", "h2")
DUALITY_HEADER = ("direction", "input", "value", "argopt", "oracle", "abs_err")


def run_oracle(cfg: dict) -> list:
    model = oracles.ExpCGModel() if cfg["model"] == "rost" else oracles.LogGammaModel(cfg.get("rho", 1.0))
    return oracles.oracle_rows(model, cfg["s_grid"])


def run_duality(cfg: dict) -> list:
    npts = cfg.get("grid_points", 2001)
    lo, hi = cfg.get("h_box", [-6.0, 6.0])
    rows = []
    if cfg["model"] == "rost":
        pp = oracles.rost_curve(npts)
        pl = legendre.pl_curve_from_pp(pp, np.linspace(lo, hi, npts))
        pp_exact = oracles.rost_gpp
    else:
        model = oracles.LogGammaModel(cfg.get("rho", 1.0))
        s = np.linspace(0.0, 1.0, npts)[1:-1]
        pp = oracles.FreeEnergyCurve(s, oracles.loggamma_gpp(model, s), "s")
        h1 = np.linspace(lo, hi, npts)
        pl = oracles.FreeEnergyCurve(h1, oracles.loggamma_gpl(model, np.stack([h1, 0 * h1], -1)), "h1")

        def pp_exact(x):
            return oracles.loggamma_gpp(model, x)
    for h in cfg.get("h_grid", []):
        val, xi = legendre.legendre_pl_from_pp(pp, h)
        exact = None
        if cfg["model"] == "loggamma":
            exact = oracles.loggamma_gpl(model, np.asarray(h, dtype=float))
        rows.append(("pl_from_pp", np.asarray(h, float), val, xi, exact if exact is not None else math.nan,
                     abs(val - exact) if exact is not None else math.nan))
    for s in cfg.get("s_grid", []):
        val, hs = legendre.legendre_pp_from_pl(pl, (s, 1 - s))
        exact = pp_exact(s)
        rows.append(("pp_from_pl", np.array([s, 1 - s]), val, hs, exact, abs(val - exact)))
    return rows


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyvar", description="Periodic and i.i.d. polymer free energies.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("periodic", "max-plus and Perron-Frobenius solvers on a periodic environment"),
                        ("mc", "Monte-Carlo estimates on i.i.d. fields"),
                        ("oracle", "closed-form curves of the solvable models"),
                        ("duality", "grid Legendre transforms checked against the oracles")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="CSV output path (default: config 'output' or stdout)")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--threads", type=int, help="worker threads (default: $POLYVAR_THREADS or 1)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            if args.command != "mc":
                raise ConfigError("--seed only applies to mc")
            cfg["seed"] = args.seed
        threads = mc.resolve_threads(args.threads)
        if args.command == "periodic":
            header, rows = PERIODIC_HEADER, run_periodic(cfg)
        elif args.command == "mc":
            header, rows = mc.MC_HEADER, run_mc(cfg, threads)
        elif args.command == "oracle":
            header, rows = ORACLE_HEADER, run_oracle(cfg)
        else:
            header, rows = DUALITY_HEADER, run_duality(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (PolyvarError, ValueError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    text = _write_csv(header, rows)
    out = args.out or cfg.get("output")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
