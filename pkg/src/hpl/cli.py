"""Batch command-line front end.

Commands: simulate, verify, convergence-study, report.  Configuration lives
in a TOML file (sections documented in the README); --seed/--replicas/
--threads/--out override the [run] block, and HPL_THREADS is the fallback
for --threads.  Exit codes: 0 success, 1 tolerance failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .ensembles import generate_ensemble, read_ensemble, write_ensemble
from .functionals import (
    KIntersectionConfig,
    PairRieszConfig,
    sample_k_intersection,
    sample_pair_riesz,
)
from .oracles import OracleConfig, SpectralGrid, fbm_sample, hermite_partial_sum, spectral_hermite_sample
from .rng import derived_rng
from .stats import correlation_with_se, energy_distance_test, hurst_from_variance, normalize
from .oracles import target_covariance

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2

TARGETS = ("pair-riesz", "k-intersection", "fbm", "hermite-sum", "hermite-spectral")


class ConfigError(Exception):
    pass


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")


def _run_block(cfg: dict, args) -> dict:
    run = dict(cfg.get("run", {}))
    if args.seed is not None:
        run["seed"] = args.seed
    if args.replicas is not None:
        run["replicas"] = args.replicas
    if args.out is not None:
        run["out"] = args.out
    if args.threads is not None:
        run["threads"] = args.threads
    elif "threads" not in run:
        run["threads"] = int(os.environ.get("HPL_THREADS", "1"))
    missing = [k for k in ("seed", "replicas", "out") if k not in run]
    if missing:
        raise ConfigError(f"[run] missing required fields: {missing}")
    if not (isinstance(run["seed"], int) and 0 <= run["seed"] < 2**64):
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not (isinstance(run["replicas"], int) and run["replicas"] >= 1):
        raise ConfigError("replicas must be a positive integer")
    return run


def _build_sampler(sim: dict, t_grid):
    """Returns (sample_fn, meta) for the configured simulate target."""
    target = sim.get("target")
    if target not in TARGETS:
        raise ConfigError(f"simulate.target must be one of {TARGETS}, got {target!r}")
    block = dict(sim.get(target, {}))
    t_grid = tuple(float(t) for t in t_grid)
    meta = {"target": target, "t_grid": list(t_grid), **block}
    try:
        if target == "pair-riesz":
            cfg = PairRieszConfig(t_grid=t_grid, **block)
            meta["window_half_width"] = cfg.window().half_width
            meta["hurst_limit"] = cfg.hurst
            fn = lambda i, rng: sample_pair_riesz(cfg, rng, replica_id=i).values
        elif target == "k-intersection":
            cfg = KIntersectionConfig(t_grid=t_grid, **block)
            meta["window_half_width"] = cfg.window().half_width
            meta["hurst_limit"] = cfg.hurst
            fn = lambda i, rng: sample_k_intersection(cfg, rng, replica_id=i).values
        elif target == "fbm":
            hurst = float(block["hurst"])
            if not (0.0 < hurst < 1.0):
                raise ValueError("fbm hurst must be in (0,1)")
            fn = lambda i, rng: fbm_sample(hurst, t_grid, rng)
        elif target == "hermite-sum":
            cfg = OracleConfig(k=int(block["k"]), hurst=float(block["hurst"]),
                               n=int(block["n"]), t_grid=t_grid)
            fn = lambda i, rng: hermite_partial_sum(cfg, rng)
        else:  # hermite-spectral
            grid = SpectralGrid(float(block["omega_max"]), float(block["delta_omega"]))
            exps = [float(a) for a in block["exponents"]]
            k = int(block["k"])
            fn = lambda i, rng: spectral_hermite_sample(k, exps, t_grid, grid, rng)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{target}] block: {exc}")
    return fn, meta


def cmd_simulate(cfg: dict, args) -> int:
    run = _run_block(cfg, args)
    sim = cfg.get("simulate")
    if not sim:
        raise ConfigError("missing [simulate] section")
    t_grid = sim.get("t_grid")
    if not t_grid:
        raise ConfigError("simulate.t_grid must be a nonempty list of times")
    fn, meta = _build_sampler(sim, t_grid)
    meta.update({k: run[k] for k in ("seed", "replicas", "threads")})
    ens = generate_ensemble(fn, t_grid, run["replicas"], run["seed"],
                            threads=run["threads"], meta=meta)
    name = sim.get("name", meta["target"])
    path = write_ensemble(ens, Path(run["out"]) / f"{name}.csv")
    print(f"wrote {path} ({ens.n_replicas} replicas x {len(ens.t_grid)} times)")
    return EXIT_OK


def _check_covariance(check: dict, out_dir: Path, seed: int) -> dict:
    ens = read_ensemble(check["ensemble"])
    hurst = float(check["hurst"])
    rtol = float(check.get("rtol", 0.1))
    results = []
    ok = True
    for s, t in check.get("pairs", [[0.5, 1.0]]):
        corr, se = correlation_with_se(ens.values, ens.t_grid, float(s), float(t))
        tgt = target_covariance(hurst, s, t) / np.sqrt(
            target_covariance(hurst, s, s) * target_covariance(hurst, t, t))
        disc = abs(corr - tgt) / abs(tgt)
        passed = bool(disc <= rtol)
        ok &= passed
        results.append({"pair": [s, t], "corr": corr, "se": se, "target": float(tgt),
                        "discrepancy": disc, "rtol": rtol, "passed": passed})
    return {"kind": "covariance", "ensemble": str(check["ensemble"]),
            "results": results, "passed": bool(ok)}


def _check_hurst(check: dict, out_dir: Path, seed: int) -> dict:
    ens = read_ensemble(check["ensemble"])
    est = hurst_from_variance(ens.values, ens.t_grid, check.get("times"))
    expected = float(check["expected"])
    atol = float(check.get("atol", 0.1))
    passed = bool(abs(est.estimate - expected) <= atol)
    return {"kind": "hurst", "ensemble": str(check["ensemble"]), "estimate": est.estimate,
            "se": est.se, "expected": expected, "atol": atol, "passed": passed}


def _check_energy(check: dict, out_dir: Path, seed: int) -> dict:
    ens_a = read_ensemble(check["a"])
    ens_b = read_ensemble(check["b"])
    va, vb = ens_a.values, ens_b.values
    if check.get("normalize", True):
        va = normalize(va, ens_a.t_grid)
        vb = normalize(vb, ens_b.t_grid)
    perms = int(check.get("permutations", 999))
    rep = energy_distance_test(va, vb, perms, derived_rng(seed, 0xE9), seed=seed)
    p_min = float(check.get("p_min", 0.01))
    passed = bool(rep.p_value >= p_min)
    return {"kind": "energy", "a": str(check["a"]), "b": str(check["b"]),
            "statistic": rep.statistic, "p_value": rep.p_value,
            "permutations": perms, "p_min": p_min, "passed": passed}


_CHECKS = {"covariance": _check_covariance, "hurst": _check_hurst, "energy": _check_energy}


def cmd_verify(cfg: dict, args) -> int:
    run = _run_block(cfg, args)
    checks = cfg.get("verify", {}).get("checks")
    if not checks:
        raise ConfigError("missing [[verify.checks]] entries")
    out_dir = Path(run["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for check in checks:
        kind = check.get("kind")
        if kind not in _CHECKS:
            raise ConfigError(f"unknown check kind {kind!r}")
        if not Path(check.get("ensemble", check.get("a", ""))).exists():
            raise ConfigError(f"ensemble file missing for check {kind}")
        reports.append(_CHECKS[kind](check, out_dir, run["seed"]))
    all_ok = all(r["passed"] for r in reports)
    report = {"version": __version__, "seed": run["seed"], "checks": reports,
              "passed": bool(all_ok)}
    (out_dir / "verify_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for r in reports:
        print(f"[{'PASS' if r['passed'] else 'FAIL'}] {r['kind']}")
    return EXIT_OK if all_ok else EXIT_TOLERANCE


def cmd_convergence_study(cfg: dict, args) -> int:
    run = _run_block(cfg, args)
    sim = cfg.get("simulate")
    study = cfg.get("study")
    if not sim or not study:
        raise ConfigError("convergence-study needs [simulate] and [study] sections")
    vary = study.get("vary")
    values = study.get("values")
    if not vary or not values:
        raise ConfigError("[study] needs 'vary' and 'values'")
    if len(set(values)) != len(values):
        raise ConfigError("duplicate rungs in study.values")
    check_tpl = study.get("check")
    if not check_tpl or check_tpl.get("kind") not in ("covariance", "hurst"):
        raise ConfigError("[study.check] must be a covariance or hurst check")
    target = sim.get("target")
    out_dir = Path(run["out"])
    out_dir.mkdir(parents=True, exist_ok=True)

    rungs = []
    for v in values:
        sim_v = json.loads(json.dumps(sim))  # deep copy
        sim_v.setdefault(target, {})[vary] = v
        t_grid = sim_v.get("t_grid")
        if not t_grid:
            raise ConfigError("simulate.t_grid must be set")
        fn, meta = _build_sampler(sim_v, t_grid)
        meta.update({k: run[k] for k in ("seed", "replicas", "threads")})
        meta["study_vary"] = vary
        meta["study_value"] = v
        ens = generate_ensemble(fn, t_grid, run["replicas"], run["seed"],
                                threads=run["threads"], meta=meta)
        name = f"{sim_v.get('name', target)}_{vary}_{v}"
        write_ensemble(ens, out_dir / f"{name}.csv")
        check = dict(check_tpl)
        check["ensemble"] = str(out_dir / f"{name}.csv")
        rep = _CHECKS[check["kind"]](check, out_dir, run["seed"])
        if check["kind"] == "covariance":
            disc = rep["results"][0]["discrepancy"]
            se = rep["results"][0]["se"]
        else:
            disc = abs(rep["estimate"] - rep["expected"])
            se = rep["se"]
        rungs.append({"value": v, "report": rep, "discrepancy": disc, "se": se})
        print(f"rung {vary}={v}: discrepancy={disc:.4f} (se {se:.4f})")

    # trend: discrepancy should not increase beyond Monte Carlo slack
    slack = [2.0 * (rungs[i]["se"] + rungs[i + 1]["se"]) for i in range(len(rungs) - 1)]
    monotone = all(
        rungs[i + 1]["discrepancy"] <= rungs[i]["discrepancy"] + slack[i]
        for i in range(len(rungs) - 1)
    )
    final_ok = rungs[-1]["report"]["passed"]
    summary = {
        "vary": vary,
        "values": list(values),
        "discrepancies": [r["discrepancy"] for r in rungs],
        "ses": [r["se"] for r in rungs],
        "monotone_within_mc_error": bool(monotone),
        "final_rung_passed": bool(final_ok),
        "require_monotone": bool(study.get("require_monotone", True)),
        "seed": run["seed"],
        "version": __version__,
    }
    passed = final_ok and (monotone or not summary["require_monotone"])
    summary["passed"] = bool(passed)
    (out_dir / "study_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"study: monotone={monotone} final_rung={'PASS' if final_ok else 'FAIL'}")
    return EXIT_OK if passed else EXIT_TOLERANCE


def cmd_report(cfg: dict, args) -> int:
    out_dir = Path(args.out or cfg.get("run", {}).get("out", "."))
    if not out_dir.exists():
        raise ConfigError(f"output directory {out_dir} does not exist")
    rows = []
    for meta_path in sorted(out_dir.glob("*.meta.json")):
        meta = json.loads(meta_path.read_text())
        rows.append((meta_path.name.replace(".csv.meta.json", ""),
                     meta.get("target", "?"), meta.get("replicas", "?"),
                     meta.get("seed", "?")))
    if rows:
        width = max(len(r[0]) for r in rows)
        print(f"{'ensemble':<{width}}  target            replicas  seed")
        for name, tgt, reps, seed in rows:
            print(f"{name:<{width}}  {tgt:<16}  {reps!s:<8}  {seed}")
    for rep_name in ("verify_report.json", "study_summary.json"):
        p = out_dir / rep_name
        if p.exists():
            data = json.loads(p.read_text())
            print(f"{rep_name}: passed={data.get('passed')}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hpl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hpl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "verify", "convergence-study", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        if args.command == "report" and args.config is None:
            cfg = {}
        else:
            if args.config is None:
                raise ConfigError("--config is required")
            cfg = _load_config(args.config)
        handler = {
            "simulate": cmd_simulate,
            "verify": cmd_verify,
            "convergence-study": cmd_convergence_study,
            "report": cmd_report,
        }[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
