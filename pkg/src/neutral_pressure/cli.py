"""Command-line entry point.

    neutral-pressure <command> --config run.json --out results/ [--seed N] ...

Commands: pressure, local-pressure, katok, vp-check, properties, oracle.
Every run writes ``manifest.json`` (the resolved configuration), result
tables as ``results.csv`` and ``results.json``, and ``certificates.json``.
A ``manifest.json`` is itself accepted as ``--config`` and replays that run.
Exit status: 0 success, 1 an asserted invariant failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .harness import (
    SCHEMA_VERSION,
    candidate_family,
    five_r_suite,
    packing_pool_suite,
    property_suite,
    shift_oracle,
    vp_experiment,
    window_range,
)
from .measures import katok_pressure, local_pressure_table, mu_inf_pressure, uniform
from .oracles import (
    ShiftOracleSpec,
    forced_cylinder_length,
    multi_generator_identical_shift_alpha,
    shift_oracle_alpha,
    shift_oracle_limit,
)
from .packing import MODES, pressure_report
from .systems import ConfigError, Potential, System, build_potential, build_sample, build_system, cylinder_complete

COMMANDS = ("pressure", "local-pressure", "katok", "vp-check", "properties", "oracle")

DEFAULTS = {
    "n": [8],
    "N_max": None,
    "eps": [0.2, 0.1],
    "delta": 0.1,
    "window": 5,
    "tol": 1e-6,
    "budget": 20,
    "pools": 200,
    "families": 200,
    "slack": 0.05,
}


class ConfigIssue(Exception):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _line_of(text: str, key: str | None) -> int | None:
    if not key or not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _as_list(v, cast):
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return [cast(x) for x in v]
    return [cast(v)]


def resolve(raw: dict, args: argparse.Namespace) -> dict:
    """Merge file config and flags; every default made explicit."""
    if "system" not in raw:
        raise ConfigIssue("missing 'system' section", "system")
    scales = {**DEFAULTS, **raw.get("scales", {})}
    try:
        scales["n"] = _as_list(scales["n"], int)
        scales["eps"] = _as_list(scales["eps"], float)
    except (TypeError, ValueError):
        raise ConfigIssue("scale lists must be numbers", "scales")
    if not scales["n"] or min(scales["n"]) < 1:
        raise ConfigIssue("n values must be >= 1", "n")
    eps = scales["eps"]
    if not eps or any(e <= 0 for e in eps):
        raise ConfigIssue("eps values must be positive", "eps")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigIssue("eps list must be strictly decreasing", "eps")
    if scales["N_max"] is not None and int(scales["N_max"]) < max(scales["n"]):
        raise ConfigIssue("N_max must be >= every n", "N_max")
    if not 0 <= float(scales["delta"]) < 1:
        raise ConfigIssue("delta must lie in [0, 1)", "delta")
    if int(scales["window"]) < 1:
        raise ConfigIssue("window must be >= 1", "window")
    if float(scales["tol"]) <= 0:
        raise ConfigIssue("tol must be positive", "tol")
    strategy = args.strategy or raw.get("strategy", "greedy")
    if strategy not in ("greedy", "exact"):
        raise ConfigIssue(f"unknown strategy {strategy!r}", "strategy")
    disjoint = args.disjoint or raw.get("disjoint", "triangle")
    if disjoint not in MODES:
        raise ConfigIssue(f"unknown disjointness mode {disjoint!r}", "disjoint")
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigIssue("seed must be an unsigned 64-bit integer", "seed")
    threads = args.threads or int(raw.get("threads", 1))
    return {
        "schema": SCHEMA_VERSION,
        "command": args.command,
        "system": raw["system"],
        "potential": raw.get("potential") or {"kind": "constant", "value": 0.0},
        "sample": raw.get("sample") or {},
        "scales": scales,
        "strategy": strategy,
        "disjoint": disjoint,
        "seed": seed,
        "threads": max(1, threads),
    }


def sub_seeds(seed: int, count: int) -> list[int]:
    """Deterministic per-task seeds split from the top-level seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _sample_for(cfg: dict, system: System):
    """``(n, eps) -> SampleSet``; ``{"kind": "forced"}`` gives cylinder-complete at the forced depth."""
    spec = dict(cfg["sample"])
    if spec.get("kind") == "forced":
        if system.space != "symbolic":
            raise ConfigIssue("forced cylinder samples need a symbolic system", "sample")
        extra = int(spec.get("extra", 0))
        return lambda n, eps: cylinder_complete(
            system, forced_cylinder_length(n, eps, system.metric_base) + extra)
    Z = build_sample(spec, system)
    return lambda n, eps: Z


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v)
                    for v in (r.get(c) for c in columns)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands; each returns (rows, columns, payload, certificates, failures, provenance)


def cmd_pressure(cfg, system, potential, get_Z):
    sc = cfg["scales"]
    rep = pressure_report(system, get_Z, potential, sc["eps"], sc["n"], sc["N_max"], sc["tol"],
                          cfg["disjoint"], cfg["strategy"])
    cols = ["n", "N_max", "eps", "alpha", "lo", "hi", "m_lo", "m_hi", "tol", "strategy", "mode",
            "collection_size"]
    payload = {"rows": rep.rows, "fit": rep.fit, "monotonicity_violations": rep.monotonicity_violations}
    bad = [c for c in rep.certificates if c.get("replayed") is False]
    failures = [f"collection at n={c['n']} eps={c['eps']} failed replay" for c in bad]
    prov = {"module": "packing-pressure", "operation": "critical_exponent"}
    return rep.rows, cols, payload, rep.certificates, failures, prov


def cmd_local(cfg, system, potential, get_Z):
    sc = cfg["scales"]
    rows, payload = [], []
    for eps in sc["eps"]:
        for n in sc["n"]:
            Z = get_Z(n, eps)
            mu = uniform(Z.points, "uniform-on-Z")
            ns = window_range(n, int(sc["window"]))
            table = local_pressure_table(system, mu, potential, eps, ns, int(sc["window"]))
            prox = table.proxies
            for i in range(len(mu)):
                for c, m in enumerate(ns):
                    rows.append({"eps": eps, "n_top": n, "atom": i, "n": m,
                                 "ball_mass": float(table.masses[i, c]), "f_n": float(table.fsums[i, c]),
                                 "quotient": float(table.quotients[i, c])})
            finite = prox[np.isfinite(prox)]
            payload.append({"eps": eps, "n": n, "window": sc["window"], "atoms": len(mu),
                            "integrated": math.fsum((finite / len(mu)).tolist()),
                            "divergent_atoms": int((~np.isfinite(prox)).sum())})
    cols = ["eps", "n_top", "atom", "n", "ball_mass", "f_n", "quotient"]
    prov = {"module": "measures-local-pressure", "operation": "local_pressure"}
    return rows, cols, {"summary": payload}, [], [], prov


def cmd_katok(cfg, system, potential, get_Z):
    sc = cfg["scales"]
    seeds = sub_seeds(cfg["seed"], 3)
    rows, certs = [], []
    for eps in sc["eps"]:
        for n in sc["n"]:
            Z = get_Z(n, eps)
            mu = uniform(Z.points, "uniform-on-Z")
            top = sc["N_max"] or n
            est = katok_pressure(system, mu, eps, float(sc["delta"]), potential, n, top, None,
                                 int(sc["window"]), float(sc["tol"]), cfg["disjoint"], cfg["strategy"])
            inf_val = mu_inf_pressure(system, mu, potential, eps, float(sc["delta"]), n, top,
                                      int(sc["window"]), float(sc["tol"]), cfg["disjoint"],
                                      cfg["strategy"], seeds)
            rows.append({"eps": eps, "n": n, "N_max": top, "delta": sc["delta"], "alpha": est.alpha,
                         "retained_mass": est.retained_mass, "removed": len(est.removed),
                         "mu_inf": inf_val})
            certs.append({"eps": eps, "n": n, "removed_atoms": [repr(mu.points[i]) for i in est.removed]})
    cols = ["eps", "n", "N_max", "delta", "alpha", "retained_mass", "removed", "mu_inf"]
    prov = {"module": "measures-local-pressure", "operation": "katok_pressure", "seeds": seeds}
    return rows, cols, {"rows": rows}, certs, [], prov


def cmd_vp(cfg, system, potential, get_Z):
    sc = cfg["scales"]
    seeds = sub_seeds(cfg["seed"], 3)
    oracle = None
    # tightness is an identity only for constant f; a first-symbol potential
    # makes the window maximum of Birkhoff averages biased upward
    if (system.space == "symbolic" and system.k == 1 and cfg["sample"].get("kind") == "forced"
            and not cfg["sample"].get("extra") and potential.kind == "constant"):
        oracle = shift_oracle(system.alphabet, system.metric_base, (potential.value,) * system.alphabet)
    rows, payload, failures = [], [], []
    for n in sc["n"]:
        rep = vp_experiment(system, lambda eps, n=n: get_Z(n, eps), potential, sc["eps"], None, n,
                            sc["N_max"], int(sc["window"]), float(sc["delta"]), float(sc["tol"]),
                            cfg["disjoint"], cfg["strategy"], seeds, float(sc["slack"]), oracle,
                            threads=cfg["threads"])
        rows.extend(rep.rows)
        payload.append(json.loads(rep.to_json()))
        failures.extend(rep.failures)
    cols = list(type(rep).CSV_COLUMNS)
    prov = {"module": "vp-harness", "operation": "vp_experiment", "seeds": seeds}
    return rows, cols, {"reports": payload}, [], failures, prov


def cmd_properties(cfg, system, potential, get_Z):
    sc = cfg["scales"]
    s1, s2, s3 = sub_seeds(cfg["seed"], 3)
    results = {**property_suite(s1, int(sc["budget"])),
               **packing_pool_suite(s2, int(sc["pools"])),
               **five_r_suite(s3, int(sc["families"]))}
    rows = [{"invariant": k, "checked": v["checked"], "violations": v["violations"]}
            for k, v in results.items()]
    failures = [f"{r['invariant']}: {r['violations']} violations" for r in rows if r["violations"]]
    prov = {"module": "vp-harness", "operation": "property_suite", "seeds": [s1, s2, s3]}
    return rows, ["invariant", "checked", "violations"], results, [], failures, prov


def cmd_oracle(cfg, system, potential, get_Z):
    if system.space != "symbolic":
        raise ConfigIssue("oracle values exist only for symbolic systems", "system")
    if potential.kind not in ("constant", "first_symbol"):
        raise ConfigIssue("oracle needs a potential that depends on the first symbol only", "potential")
    sc = cfg["scales"]
    table = potential.table if potential.kind == "first_symbol" else (potential.value,) * system.alphabet
    m, b = system.alphabet, system.metric_base
    rows = []
    for eps in sc["eps"]:
        for n in sc["n"]:
            s = forced_cylinder_length(n, eps, b)
            if system.k == 1:
                alpha = shift_oracle_alpha(ShiftOracleSpec(m, b, 1, table, eps, n))
                limit = shift_oracle_limit(m, b, table, eps)
            else:
                if any(v != 0 for v in table):
                    raise ConfigIssue("multi-generator oracle is defined for f = 0 only", "potential")
                alpha = multi_generator_identical_shift_alpha(m, eps, system.k, n, b)
                limit = 0.0
            rows.append({"eps": eps, "n": n, "s_min": s, "alpha": alpha, "limit": limit})
    prov = {"module": "oracles", "operation": "shift_oracle_alpha"}
    return rows, ["eps", "n", "s_min", "alpha", "limit"], {"rows": rows}, [], [], prov


HANDLERS = {"pressure": cmd_pressure, "local-pressure": cmd_local, "katok": cmd_katok,
            "vp-check": cmd_vp, "properties": cmd_properties, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neutral-pressure",
                                description="Packing pressure estimates for free semigroup actions.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--strategy", choices=("greedy", "exact"), default=None)
    p.add_argument("--disjoint", choices=MODES, default=None)
    return p


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    text = ""
    try:
        try:
            text = Path(args.config).read_text()
            raw = json.loads(text)
        except OSError as exc:
            raise ConfigIssue(f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            print(f"{args.config}:{exc.lineno}: invalid JSON: {exc.msg}", file=sys.stderr)
            return 2
        if isinstance(raw, dict) and "config" in raw and "schema" in raw:
            # a manifest from an earlier run: replay its resolved configuration
            raw = {k: v for k, v in raw["config"].items() if k not in ("schema", "command")}
        cfg = resolve(raw, args)
        system = build_system(cfg["system"])
        potential = build_potential(cfg["potential"], system)
        get_Z = _sample_for(cfg, system)
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".write-test"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigIssue(f"output directory not writable: {exc}")
        rows, cols, payload, certs, failures, prov = HANDLERS[args.command](cfg, system, potential, get_Z)
    except (ConfigIssue, ConfigError) as exc:
        line = _line_of(text, getattr(exc, "key", None))
        where = f"{args.config}:{line}" if line else args.config
        print(f"{where}: config error: {exc}", file=sys.stderr)
        return 2

    manifest = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg,
        "provenance": {"results.csv": {**prov, "scales": cfg["scales"]}},
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
        "failures": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    (out / "results.csv").write_text(_csv(rows, cols))
    (out / "results.json").write_text(json.dumps(payload, indent=1, sort_keys=True, default=repr) + "\n")
    (out / "certificates.json").write_text(json.dumps(certs, indent=1, sort_keys=True) + "\n")
    for f in failures:
        print(f"invariant failed: {f}", file=sys.stderr)
    return 1 if failures else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
