"""Command-line front end: ``telescopy {fisher,optimize,reproduce,montecarlo,validate}``.

CSV goes to ``--out`` (if given); a JSON summary always goes to stdout.
Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

import argparse
import json
import sys
from dataclasses import replace
from math import comb

import numpy as np

from . import __version__
from . import fisher as fz
from .config import ConfigError, load_document, resolve
from .distillation import (
    Variant,
    ansatz_schedule,
    optimize_gamma,
    optimize_local_objective,
    yields,
)
from .montecarlo import estimate_yields, simulate_scheme
from .povm import Scheme, born_distribution, build_povm
from .state import build_stellar_state, pair_name, pairs
from .tables import ResultTable
from .validation import run_checks

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

FIGURES = ("ratio-vs-D", "gamma-vs-M", "tau-profile")


def _provenance(cfg, command, **extra):
    return {"config_hash": cfg.config_hash, "seed": str(cfg.seed), "command": command,
            **{k: str(v) for k, v in extra.items()}}


def _schedule(cfg, required):
    """Resolve the schedule spec; ``optimize`` dispatches on the scheme."""
    if cfg.schedule is None:
        if required:
            raise ConfigError("schedule", f"schedule required for {cfg.scheme.value}")
        return None, None
    if cfg.schedule == "optimize":
        if cfg.scheme is Scheme.LOCAL_QUANTUM:
            rep = optimize_local_objective(cfg.m, cfg.d, cfg.epsilon, cfg.budget, cfg.seed, cfg.regime_factor)
        else:
            rep = optimize_gamma(cfg.m, cfg.d, cfg.variant, cfg.budget, cfg.seed)
        return rep.schedule, rep
    return cfg.explicit_schedule(), None


BASELINE = {
    Scheme.GJC_QUANTUM: Scheme.GJC_CLASSICAL,
    Scheme.ALL_PAIRS_BIPARTITE: Scheme.GJC_CLASSICAL,
    Scheme.W_STATE: Scheme.GJC_CLASSICAL,
    Scheme.LOCAL_QUANTUM: Scheme.LOCAL_CLASSICAL,
    Scheme.MULTIPARTITE_FRAME: Scheme.LOCAL_CLASSICAL,
}


def cmd_fisher(cfg):
    schedule, _ = _schedule(cfg, cfg.scheme.needs_yield)
    y = yields(cfg.m, schedule) if schedule is not None else None
    kw = {"exact": True} if cfg.scheme is Scheme.MULTIPARTITE_FRAME else {}
    ana = fz.fisher_closed_form(cfg.settings, cfg.m, cfg.epsilon, cfg.coherence, y, **kw)
    num = fz.fisher_numeric(cfg.settings, cfg.m, cfg.epsilon, cfg.coherence, y, cfg.step)
    base = BASELINE.get(cfg.scheme)
    ratios = [np.nan] * len(pairs(cfg.m))
    if base is not None:
        ref = fz.fisher_closed_form(replace(cfg.settings, scheme=base), cfg.m, cfg.epsilon, cfg.coherence)
        for k in range(len(ratios)):
            a, b = ana.blocks[k], ref.blocks[k]
            nb = np.linalg.norm(b)
            ratios[k] = float(np.linalg.norm(a) / nb) if nb > 0 else np.nan
    table = ResultTable(
        (("pair", "str"), ("method", "str"), ("F_aa", "float"), ("F_ab", "float"), ("F_bb", "float"),
         ("rel_diff", "float"), ("ratio_to_baseline", "float")),
        provenance=_provenance(cfg, "fisher", scheme=cfg.scheme.value),
    )
    worst = 0.0
    for k, p in enumerate(pairs(cfg.m)):
        a, n = ana.blocks[k], num.blocks[k]
        scale = np.max(np.abs(a))
        rel = float(np.max(np.abs(a - n)) / scale) if scale > 0 else float(np.max(np.abs(n)))
        worst = max(worst, rel)
        for method, blk in (("analytic", a), ("numeric", n)):
            table.add(pair_name(p), method, blk[0, 0], blk[0, 1], blk[1, 1], rel, ratios[k])
    summary = {
        "command": "fisher",
        "scheme": cfg.scheme.value,
        "m": cfg.m,
        "max_rel_diff": worst,
        "singular_visibility": ana.singular,
        "regime": ana.regime,
        "normalization": ana.normalization,
    }
    if y is not None:
        summary.update(gamma_d=y.gamma_d, beta_d=y.beta_d)
    return table, summary, EXIT_OK


def cmd_optimize(cfg):
    if cfg.m < 3:
        raise ConfigError("m", "optimization needs m >= 3")
    local = cfg.scheme is Scheme.LOCAL_QUANTUM
    if local:
        rep = optimize_local_objective(cfg.m, cfg.d, cfg.epsilon, cfg.budget, cfg.seed, cfg.regime_factor)
    else:
        rep = optimize_gamma(cfg.m, cfg.d, cfg.variant, cfg.budget, cfg.seed)
    y = rep.yields
    table = ResultTable(
        (("round", "int"), ("tau", "float"), ("x", "float"), ("gamma_r", "float"), ("beta_r", "float")),
        provenance=_provenance(cfg, "optimize", objective="local" if local else "gamma",
                               variant=cfg.variant.value, m=cfg.m, d=cfg.d),
    )
    for r, (t, x, gr, br) in enumerate(zip(rep.schedule.taus, y.x, y.gamma_terms, y.beta_terms), 1):
        table.add(r, t, x, gr, br)
    summary = {
        "command": "optimize",
        "objective_kind": "gamma_d^2/beta_d" if local else "gamma_d",
        "objective": rep.objective,
        "gamma_d": y.gamma_d,
        "beta_d": y.beta_d,
        "gamma_times_m_minus_1": y.gamma_d * (cfg.m - 1),
        "converged": rep.converged,
        "iterations": rep.iterations,
        "evaluations": rep.evaluations,
        "seeds": list(rep.seeds),
    }
    return table, summary, EXIT_OK


def _ints(doc, key, default):
    v = doc.get(key)
    if v is None:
        return list(default)
    if not isinstance(v, list) or not all(isinstance(i, int) and i >= 1 for i in v):
        raise ConfigError(key, "must be a list of positive integers")
    return v


def cmd_reproduce(cfg, figure, doc):
    # figure defaults differ from the global ones, so look at what the user actually set
    if figure not in FIGURES:
        raise ConfigError("figure", f"unknown figure {figure!r}; expected one of {', '.join(FIGURES)}")
    table = ResultTable((("x", "int"), ("series", "str"), ("value", "float")),
                        provenance=_provenance(cfg, "reproduce", figure=figure))
    summary = {"command": "reproduce", "figure": figure}
    if figure == "ratio-vs-D":
        m = cfg.m if "m" in doc else 8
        ds = _ints(doc, "ds", range(1, 71))
        below = True
        for d in ds:
            opt = comb(m, 2) * optimize_gamma(m, d, Variant.PURE_WEAK, cfg.budget, cfg.seed).gamma_d
            ans = comb(m, 2) * yields(m, ansatz_schedule(d)).gamma_d
            table.add(d, "optimized", opt)
            table.add(d, "ansatz", ans)
            below &= ans <= opt + 1e-12
        summary.update(m=m, final_optimized=opt, target=m / 2, ansatz_below_optimized=bool(below))
    elif figure == "gamma-vs-M":
        d = cfg.d if "d" in doc else 70
        ms = _ints(doc, "ms", range(3, 11))
        dev = {}
        for m in ms:
            g = optimize_gamma(m, d, Variant.PURE_WEAK, cfg.budget, cfg.seed).gamma_d
            table.add(m, "optimized", g)
            table.add(m, "fit", 1.0 / (m - 1))
            dev[m] = abs(g * (m - 1) - 1.0)
        summary.update(d=d, max_fit_deviation=max(dev.values()),
                       fit_within_1pct=bool(max(dev.values()) < 0.01))
    else:
        d = cfg.d if "d" in doc else 50
        ms = _ints(doc, "ms", (3, 5, 7))
        for m in ms:
            rep = optimize_gamma(m, d, Variant.PURE_WEAK, cfg.budget, cfg.seed)
            for r, t in enumerate(rep.schedule.taus, 1):
                table.add(r, f"M={m}", t)
            if m == 3:
                summary["m3_nondecreasing"] = bool(np.all(np.diff(rep.schedule.taus) >= -1e-6))
        summary["d"] = d
    return table, summary, EXIT_OK


def cmd_montecarlo(cfg):
    schedule, _ = _schedule(cfg, cfg.scheme.needs_yield)
    table = ResultTable(
        (("quantity", "str"), ("label", "str"), ("analytic", "float"), ("empirical", "float"),
         ("stderr", "float"), ("z", "float")),
        provenance=_provenance(cfg, "montecarlo", scheme=cfg.scheme.value, samples=cfg.samples),
    )
    ok = True
    n, seed, thr = cfg.samples, cfg.seed, cfg.threads
    if schedule is not None and cfg.m >= 3:
        y = yields(cfg.m, schedule)
        g_hat, b_hat = estimate_yields(cfg.m, schedule, n, seed, thr)
        for est, value, name in ((g_hat, y.gamma_d, "gamma_d"), (b_hat, y.beta_d, "beta_d")):
            se = np.sqrt(value * (1 - value) / n)
            z = (est.mean - value) / se if se > 0 else 0.0
            ok &= abs(z) <= 4
            table.add(name, "A-B", value, est.mean, est.stderr, z)
    if cfg.scheme is not Scheme.W_STATE and (schedule is None or schedule.variant is Variant.PURE_WEAK):
        emp = simulate_scheme(cfg.settings, cfg.m, cfg.epsilon, cfg.coherence, schedule, n, seed, thr)
        if cfg.scheme is Scheme.MULTIPARTITE_FRAME:
            ana = fz.multipartite_frame_distribution(cfg.m, cfg.epsilon, cfg.coherence,
                                                     cfg.settings.telescope_phases(cfg.m))
        else:
            y = yields(cfg.m, schedule) if schedule is not None else None
            ana = born_distribution(build_povm(cfg.settings, cfg.m, y),
                                    build_stellar_state(cfg.m, cfg.epsilon, cfg.coherence))
        rows, agree = emp.compare(ana)
        ok &= agree
        for lab, p, f, z in rows:
            table.add("outcome", str(lab), p, f, float(np.sqrt(f * (1 - f) / n)),
                      float(z) if np.isfinite(z) else np.inf)
    summary = {"command": "montecarlo", "scheme": cfg.scheme.value, "samples": n,
               "all_within_4se": bool(ok)}
    return table, summary, EXIT_OK if ok else EXIT_FAIL


def cmd_validate(cfg):
    table = ResultTable((("check", "str"), ("passed", "bool"), ("detail", "str")),
                        provenance=_provenance(cfg, "validate"))
    results = run_checks(cfg.seed)
    for name, passed, detail in results:
        table.add(name, passed, detail)
    failed = [r[0] for r in results if not r[1]]
    summary = {"command": "validate", "passed": len(results) - len(failed), "failed": failed}
    return table, summary, EXIT_FAIL if failed else EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="telescopy", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--out", help="CSV output path")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--threads", type=int, help="worker threads for sampling")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set a configuration field (dotted keys, JSON values); repeatable")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("fisher", parents=[common], help="analytic and numeric Fisher blocks")
    sub.add_parser("optimize", parents=[common], help="optimize the tau schedule")
    rp = sub.add_parser("reproduce", parents=[common], help="figure data")
    rp.add_argument("figure", nargs="?", help=f"one of {', '.join(FIGURES)} (or the config's figure field)")
    sub.add_parser("montecarlo", parents=[common], help="sampling cross-check")
    sub.add_parser("validate", parents=[common], help="invariant suite")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.override)
        if args.threads is not None:
            overrides.append(f"threads={args.threads}")
        doc = load_document(args.config, overrides, args.seed)
        cfg = resolve(doc)
        if args.command == "fisher":
            table, summary, code = cmd_fisher(cfg)
        elif args.command == "optimize":
            table, summary, code = cmd_optimize(cfg)
        elif args.command == "reproduce":
            table, summary, code = cmd_reproduce(cfg, args.figure or doc.get("figure"), doc)
        elif args.command == "montecarlo":
            table, summary, code = cmd_montecarlo(cfg)
        else:
            table, summary, code = cmd_validate(cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "field": exc.field, "message": str(exc)}))
        return EXIT_CONFIG
    except ValueError as exc:
        print(json.dumps({"error": "config", "field": None, "message": str(exc)}))
        return EXIT_CONFIG
    out = args.out or cfg.output
    if out:
        table.write(out)
        summary["out"] = out
    summary["config_hash"] = cfg.config_hash
    summary["rows"] = len(table.rows)
    print(json.dumps(summary, sort_keys=True, default=float))
    return code


if __name__ == "__main__":
    sys.exit(main())
