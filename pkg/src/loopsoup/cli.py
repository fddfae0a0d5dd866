"""Command line entry point: ``loopsoup --config run.yaml [--seed S] [--out DIR]``.

The config is YAML.  Lines of the form ``key = value`` are accepted as well
and read as ``key: value``, so ``weight = {kind: spin, N: 2}`` works.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import re
import sys
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .graphs import Graph, build_named

EXIT_OK, EXIT_MISSING, EXIT_INVALID, EXIT_OUTPUT, EXIT_ENGINE = 0, 2, 3, 4, 5

FIELDS = ("config_hash", "seed", "engine", "beta", "observable", "params", "value", "se", "n_eff", "extra")

DEFAULTS = {
    "N": 2.0,
    "beta": [0.5],
    "weight": {"kind": "constant"},
    "T_max": 20,
    "m_cap": 64,
    "sweeps": 10_000,
    "burn_in": 1000,
    "thin": "auto",
    "seeds": [0],
    "cycle_max_len": 4,
    "observables": None,
    "formats": ["jsonl", "csv"],
    "output": "results",
    "d": 2,
    "k_max": 10,
    "method": "exact",
    "samples": 100_000,
    "L": 128,
}

DEFAULT_OBSERVABLES = {
    "exact": ["Z"],
    "rpm_exact": ["Z"],
    "mcmc": ["rho:2", "rho:4"],
    "threshold": ["chi", "beta_tilde"],
    "green": ["neighbor_gap", "max_residual"],
}

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_nonneg_int = {"type": "integer", "minimum": 0}
_beta = {"type": "number", "minimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["graph", "engine"],
    "additionalProperties": False,
    "properties": {
        "graph": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["single_edge", "path", "cycle", "box", "torus"]},
                "n": _pos_int,
                "L": _pos_int,
                "d": _pos_int,
            },
        },
        "weight": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["constant", "spin", "factorial", "pairwise", "table"]}},
        },
        "N": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"oneOf": [_beta, {"type": "array", "items": _beta, "minItems": 1}]},
        "engine": {"enum": ["exact", "rpm_exact", "mcmc", "threshold", "green"]},
        "T_max": _nonneg_int,
        "m_cap": _nonneg_int,
        "sweeps": _pos_int,
        "burn_in": _nonneg_int,
        "thin": {"oneOf": [{"const": "auto"}, _pos_int]},
        "seeds": {"type": "array", "items": _nonneg_int, "minItems": 1},
        "cycle_max_len": _nonneg_int,
        "observables": {"type": ["array", "null"], "items": {"type": "string"}},
        "formats": {"type": "array", "items": {"enum": ["jsonl", "csv"]}, "minItems": 1},
        "output": {"type": "string"},
        "d": _pos_int,
        "k_max": _pos_int,
        "method": {"enum": ["exact", "mc"]},
        "samples": {"type": "integer", "minimum": 10_000},
        "L": {"type": "integer", "minimum": 4},
    },
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- config ---------------------------------------------------------------------

_ASSIGN = re.compile(r"^(\s*)([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _preprocess(text: str) -> str:
    return "\n".join(_ASSIGN.sub(r"\1\2: \3", line) for line in text.splitlines())


def _error_key(err: jsonschema.ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        m = re.search(r"'([^']+)' is a required property", err.message)
        if m:
            path.append(m.group(1))
    elif err.validator == "additionalProperties":
        m = re.search(r"\('([^']+)'", err.message)
        if m:
            path.append(m.group(1))
    return ".".join(path) or "<root>"


def load_config(path) -> dict:
    """Read, validate and resolve a run config; raises CliError with exit codes 2/3."""
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, f"config file not found: {path}")
    try:
        raw = yaml.safe_load(_preprocess(p.read_text()))
    except yaml.YAMLError as exc:
        raise CliError(EXIT_INVALID, f"config does not parse: {exc}") from None
    return resolve_config(raw)


def resolve_config(raw) -> dict:
    if not isinstance(raw, dict):
        raise CliError(EXIT_INVALID, "invalid config at '<root>': expected a mapping")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        key = _error_key(err)
        raise CliError(EXIT_INVALID, f"invalid config at '{key}': {err.message}")
    cfg = {k: v for k, v in DEFAULTS.items()}
    cfg.update(raw)
    if not isinstance(cfg["beta"], list):
        cfg["beta"] = [cfg["beta"]]
    if cfg["observables"] is None:
        cfg["observables"] = list(DEFAULT_OBSERVABLES[cfg["engine"]])
    # semantic checks the schema cannot express
    try:
        from .weights import weight_from_spec

        weight_from_spec(cfg["weight"])
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"invalid config at 'weight': {exc}") from None
    try:
        make_graph(cfg["graph"])
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"invalid config at 'graph': {exc}") from None
    if cfg["engine"] == "exact" and cfg["T_max"] % 2:
        raise CliError(EXIT_INVALID, "invalid config at 'T_max': must be even")
    return cfg


def config_hash(cfg: dict) -> str:
    """Content hash of the resolved config (the output location is excluded)."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_graph(spec: dict) -> Graph:
    spec = dict(spec)
    return build_named(spec.pop("kind"), **spec)


# -- engines --------------------------------------------------------------------


def _parse_obs(obs: str):
    name, *args = obs.split(":")
    try:
        return name, [int(a) for a in args]
    except ValueError:
        raise CliError(EXIT_INVALID, f"invalid config at 'observables': bad arguments in {obs!r}") from None


def _value(x):
    if isinstance(x, Fraction):
        return float(x), str(x)
    return float(x), None


def _rec(engine, beta, observable, params, value, se=None, n_eff=None, seed=None, extra=None) -> dict:
    return {"seed": seed, "engine": engine, "beta": beta, "observable": observable, "params": params,
            "value": value, "se": se, "n_eff": n_eff, "extra": extra or {}}


def run_exact(cfg, g, U) -> list[dict]:
    from . import rwls_exact as rx

    out = []
    T = cfg["T_max"]
    for beta in cfg["beta"]:
        tab = rx.soup_table(g, U, cfg["N"], beta, T)
        for obs in cfg["observables"]:
            name, a = _parse_obs(obs)
            if name == "Z":
                v = tab.Z
            elif name == "rho" and len(a) == 1:
                v = rx.density_rho(g, U, cfg["N"], beta, T, a[0]).value
            elif name == "two_point" and len(a) == 2:
                v = tab.two_point(*a)
            elif name == "connection" and len(a) == 2:
                v = tab.connection(*a)
            elif name == "sandwich_middle" and len(a) == 2:
                v = tab.sandwich_middle(*a)
            elif name == "localtime" and len(a) in (1, 2):
                v = tab.localtime_moment(a[0], a[1] if len(a) == 2 else 1)
            else:
                raise CliError(EXIT_INVALID, f"invalid config at 'observables': {obs!r} not available for exact")
            val, exact = _value(v)
            out.append(_rec("exact", beta, obs, {"T_max": T}, val,
                            extra={"tail_estimate": float(tab.tail_estimate()), "exact": exact}))
    return out


def run_rpm_exact(cfg, g, U) -> list[dict]:
    from .rpm import enumerate_rpm

    out = []
    cap = cfg["m_cap"]
    total = cfg["T_max"]
    for beta in cfg["beta"]:
        res = enumerate_rpm(g, U, cfg["N"], beta, cap, total_cap=total)
        for obs in cfg["observables"]:
            name, a = _parse_obs(obs)
            if name == "Z":
                v = res.Z
            elif name == "localtime" and len(a) == 1:
                v = res.localtime_means[a[0]]
            elif name == "double_links" and len(a) == 1:
                v = res.edge_means[a[0]]
            else:
                raise CliError(EXIT_INVALID, f"invalid config at 'observables': {obs!r} not available for rpm_exact")
            out.append(_rec("rpm_exact", beta, obs, {"m_cap": cap, "total_cap": total}, float(v)))
    return out


def _chain_records(cfg, chain, beta, seed) -> list[dict]:
    from . import estimators as est

    out = []
    diag = {"cap_hit_rate": chain.cap_hit_rate, "thin": chain.thin, "tau_int": chain.tau_int,
            "cycle_space_covered": chain.cycle_space_covered}
    for obs in cfg["observables"]:
        name, a = _parse_obs(obs)
        if name == "rho" and len(a) == 1:
            r = est.estimate_rho(chain, a[0])
        elif name == "micro" and len(a) == 1:
            r = est.micro_localtime_partial(chain, a[0])
        elif name == "localtime" and len(a) in (1, 2):
            r = est.estimate_localtime_moments(chain, a[0], a[1] if len(a) == 2 else 1)
        elif name == "connection" and len(a) == 1:
            r = est.estimate_connection(chain, a[0])
        elif name == "sandwich" and len(a) == 1:
            s = est.spin_correlation_sandwich(chain, a[0])
            out.append(_rec("mcmc", beta, obs, {"pair": a[0]}, s["middle"], s["middle_se"], chain.n_samples, seed,
                            {k: v for k, v in s.items() if k not in ("middle", "middle_se")} | diag))
            continue
        else:
            raise CliError(EXIT_INVALID, f"invalid config at 'observables': {obs!r} not available for mcmc")
        params = {k: v for k, v in r.params.items() if k not in chain.params}
        out.append(_rec("mcmc", beta, obs, params, r.estimate, r.se, r.ess, seed, diag))
    return out


def run_mcmc(cfg, g, U, out_dir: Path, formats, chash) -> list[dict]:
    from .mcmc import RPMSampler

    obs_vertices = sorted({_parse_obs(o)[1][0] for o in cfg["observables"] if o.startswith("localtime")} | {0})
    merged = []
    per_seed = {s: [] for s in cfg["seeds"]}
    for beta in cfg["beta"]:
        for seed in cfg["seeds"]:
            sampler = RPMSampler(weight=U, N=cfg["N"], beta=beta, m_cap=cfg["m_cap"], n_sweeps=cfg["sweeps"],
                                 burn_in=cfg["burn_in"], thin=cfg["thin"], seed=seed,
                                 cycle_max_len=cfg["cycle_max_len"], obs_vertices=tuple(obs_vertices))
            chain = sampler.fit(g).chain_
            per_seed[seed].extend(_chain_records(cfg, chain, beta, seed))
    for seed, recs in per_seed.items():
        emit_results(recs, out_dir / f"chain_seed{seed}", formats, chash)
    # merge: equal-weight average over seeds, errors combined as independent
    seeds = cfg["seeds"]
    for i in range(len(per_seed[seeds[0]])):
        rows = [per_seed[s][i] for s in seeds]
        vals = np.array([r["value"] for r in rows])
        ses = np.array([r["se"] for r in rows])
        r0 = rows[0]
        merged.append(_rec("mcmc", r0["beta"], r0["observable"], r0["params"], float(vals.mean()),
                           float(math.sqrt((ses**2).sum()) / len(seeds)), float(sum(r["n_eff"] for r in rows)),
                           None, {"seeds": list(seeds), "per_seed": [float(v) for v in vals]}))
    return merged


def run_threshold(cfg, U, seed) -> list[dict]:
    from .threshold import beta_lower_bound, chi_exact, chi_mc

    d, kmax = cfg["d"], cfg["k_max"]
    if cfg["method"] == "exact":
        chi = {k: chi_exact(U, d, k) for k in range(1, kmax + 1)}
    else:
        rng = np.random.default_rng(seed)
        chi = {k: chi_mc(U, d, k, cfg["samples"], rng) for k in range(1, kmax + 1)}
    out = []
    wants = set(cfg["observables"])
    if "chi" in wants:
        for k, c in chi.items():
            val, exact = _value(c.value)
            out.append(_rec("threshold", None, "chi", {"k": k, "d": d, "method": c.method}, val, c.se, None,
                            seed if cfg["method"] == "mc" else None, {"exact": exact}))
    if "beta_tilde" in wants:
        b = beta_lower_bound(chi, d)
        out.append(_rec("threshold", None, "beta_tilde", {"d": d, "window": b["window"]}, b["beta_tilde"],
                        extra={k: b[k] for k in ("rate", "rate_single", "beta_tilde_single", "rate_top", "label")}))
    unknown = wants - {"chi", "beta_tilde"}
    if unknown:
        raise CliError(EXIT_INVALID, f"invalid config at 'observables': {sorted(unknown)} not available for threshold")
    return out


def run_green(cfg) -> list[dict]:
    from .estimators import green_gap

    L = cfg["L"]
    res = green_gap(L)
    out = []
    for obs in cfg["observables"]:
        if obs == "neighbor_gap":
            out.append(_rec("green", None, obs, {"L": L, "r": 1.0}, float(res["gap"][0]), extra={"g_xx": res["g_xx"]}))
        elif obs == "max_residual":
            out.append(_rec("green", None, obs, {"L": L, "r_range": [2, 16]}, res["max_residual"],
                            extra={"constant": res["constant"]}))
        elif obs == "gaps":
            for r, gap, model in zip(res["r"], res["gap"], res["model"]):
                out.append(_rec("green", None, obs, {"L": L, "r": float(r)}, float(gap),
                                extra={"model": float(model)}))
        else:
            raise CliError(EXIT_INVALID, f"invalid config at 'observables': {obs!r} not available for green")
    return out


def dispatch(cfg: dict, out_dir: Path, chash: str) -> list[dict]:
    """Run the configured engine; returns the (merged) records."""
    from .weights import weight_from_spec

    U = weight_from_spec(cfg["weight"])
    engine = cfg["engine"]
    if engine == "threshold":
        return run_threshold(cfg, U, cfg["seeds"][0])
    if engine == "green":
        return run_green(cfg)
    g = make_graph(cfg["graph"])
    if engine == "exact":
        return run_exact(cfg, g, U)
    if engine == "rpm_exact":
        return run_rpm_exact(cfg, g, U)
    return run_mcmc(cfg, g, U, out_dir, cfg["formats"], chash)


# -- output ---------------------------------------------------------------------


def _ordered(rec: dict, chash: str) -> dict:
    full = dict(rec, config_hash=chash)
    return {k: full.get(k) for k in FIELDS}


def _dumps(x) -> str:
    return json.dumps(x, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, (Fraction, tuple)):
        return str(x) if isinstance(x, Fraction) else list(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


def emit_results(records: list[dict], stem: Path, formats, chash: str) -> list[Path]:
    """Write ``stem.jsonl`` and/or ``stem.csv``; raises CliError(4) on empty input or I/O failure."""
    if not records:
        raise CliError(EXIT_OUTPUT, "no records to write")
    rows = [_ordered(r, chash) for r in records]
    written = []
    try:
        stem.parent.mkdir(parents=True, exist_ok=True)
        if "jsonl" in formats:
            p = stem.with_suffix(".jsonl")
            lines = []
            for r in rows:
                body = ",".join(f"{json.dumps(k)}:{_dumps(r[k])}" for k in FIELDS)
                lines.append("{" + body + "}")
            p.write_text("\n".join(lines) + "\n")
            written.append(p)
        if "csv" in formats:
            p = stem.with_suffix(".csv")
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(FIELDS)
            for r in rows:
                w.writerow([_dumps(r[k]) if isinstance(r[k], (dict, list)) else ("" if r[k] is None else r[k])
                            for k in FIELDS])
            p.write_text(buf.getvalue())
            written.append(p)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, f"cannot write results: {exc}") from None
    return written


def run(config_path, seed=None, out=None) -> tuple[int, list[Path]]:
    cfg = load_config(config_path)
    if seed is not None:
        if seed < 0:
            raise CliError(EXIT_INVALID, "invalid config at 'seed': must be >= 0")
        cfg["seeds"] = [int(seed)]
    out_dir = Path(out if out is not None else cfg["output"])
    chash = config_hash(cfg)
    try:
        records = dispatch(cfg, out_dir, chash)
    except CliError:
        raise
    except Exception as exc:  # engine failure
        raise CliError(EXIT_ENGINE, f"engine {cfg['engine']!r} failed: {type(exc).__name__}: {exc}") from exc
    files = emit_results(records, out_dir / "results", cfg["formats"], chash)
    try:
        resolved = {"config_hash": chash, "config": cfg}
        p = out_dir / "config.resolved.json"
        p.write_text(json.dumps(resolved, sort_keys=True, indent=2, default=str) + "\n")
        files.append(p)
    except OSError as exc:
        raise CliError(EXIT_OUTPUT, f"cannot write results: {exc}") from None
    return EXIT_OK, files


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="loopsoup", description="Loop soup and random path model engines.")
    ap.add_argument("--config", required=True, help="YAML run config")
    ap.add_argument("--seed", type=int, default=None, help="override the config seeds with one seed")
    ap.add_argument("--out", default=None, help="output directory (default: config 'output')")
    args = ap.parse_args(argv)
    try:
        code, files = run(args.config, args.seed, args.out)
    except CliError as exc:
        print(f"loopsoup: error: {exc}", file=sys.stderr)
        return exc.code
    for f in files:
        print(f)
    return code


if __name__ == "__main__":
    sys.exit(main())
