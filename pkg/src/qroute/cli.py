"""Command-line interface.

Subcommands: simulate, exact, steady, compare, t0.  Flags can also come
from a flat key=value config file (--config); command-line values win.
Exit codes: 0 success, 1 invariant violation detected, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .costs import parse_cost
from .coupling import verify_cost_dominance, verify_distribution_match
from .errors import QrouteError
from .exact import ExactEvalConfig, centralized_dp, exact_finite_cost, verify_dominance_smallcase
from .harness import (
    ExperimentConfig,
    measure_t0,
    run_experiment,
    run_replication,
    write_summary_json,
    write_trace_csv,
)
from .model import Convention, ModelParams
from .pmf import Pmf
from .steady import DEFAULT_CAP, infinite_cost_g0, infinite_cost_ghat, build_s_chain


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value file; CLI flags override")
    p.add_argument("--lambda", dest="lam", type=float, help="arrival probability")
    p.add_argument("--mu", type=float, help="departure probability")
    p.add_argument("--policy", choices=["ghat", "g0", "gtilde"])
    p.add_argument("--horizon", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cost", help="linear | square | poly:<coeffs> | ';'-joined stages")
    p.add_argument("--init", help="JSON file with two PMFs, or eq:<x0>")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument(
        "--convention",
        choices=[c.value for c in Convention],
        help="per-slot arrival/departure law (default independent)",
    )
    p.add_argument("--cap", type=int, help="truncation cap for steady-state solves")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")


_DEFAULTS = {
    "lam": 0.1,
    "mu": 0.5,
    "policy": "ghat",
    "horizon": 100,
    "replications": 1,
    "seed": 0,
    "cost": "linear",
    "init": "eq:0",
    "convention": "independent",
    "cap": DEFAULT_CAP,
}


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise QrouteError(f"bad config line: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("lambda", "lam")] = v.strip()
    return out


_INT_KEYS = {"horizon", "replications", "seed", "cap", "jobs"}
_FLOAT_KEYS = {"lam", "mu"}


def _resolve(args: argparse.Namespace) -> dict:
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for k, v in _load_config_file(args.config).items():
            merged[k] = int(v) if k in _INT_KEYS else float(v) if k in _FLOAT_KEYS else v
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func"):
            merged[k] = v
    return merged


def _parse_init(spec: str) -> tuple[Pmf, Pmf, tuple[int, int] | None]:
    if spec.startswith("eq:"):
        x0 = int(spec[3:])
        return Pmf.point(x0), Pmf.point(x0), (x0, x0)
    with open(spec) as fh:
        data = json.load(fh)
    pi1 = Pmf(data["pi1"])
    pi2 = Pmf(data["pi2"])
    init = tuple(data["initial"]) if "initial" in data else None
    return pi1, pi2, init


def _emit(payload: dict, out_path: str | None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _experiment_config(m: dict) -> ExperimentConfig:
    pi1, pi2, init = _parse_init(m["init"])
    return ExperimentConfig(
        params=ModelParams(lam=m["lam"], mu=m["mu"]),
        pi1=pi1,
        pi2=pi2,
        horizon=m["horizon"],
        cost=parse_cost(m["cost"]),
        policy=m["policy"],
        replications=m["replications"],
        seed=m["seed"],
        convention=Convention(m["convention"]),
        initial=init,
    )


def _cmd_simulate(args) -> int:
    m = _resolve(args)
    config = _experiment_config(m)
    if m["format"] == "csv":
        traces = {}
        violations = 0
        for rep in range(config.replications):
            trace, stats = run_replication(config, rep, record_trace=True)
            traces[rep] = trace
            violations += stats.violation_total()
        if not m.get("out"):
            raise QrouteError("--format csv requires --out")
        write_trace_csv(m["out"], traces)
        return 1 if violations else 0
    summary = run_experiment(config, n_jobs=int(m.get("jobs", 1)))
    if m.get("out"):
        write_summary_json(m["out"], summary)
    else:
        print(json.dumps(summary.to_json_dict(), indent=2, sort_keys=True))
    return 1 if summary.violation_total() else 0


def _cmd_exact(args) -> int:
    m = _resolve(args)
    pi1, pi2, _ = _parse_init(m["init"])
    config = ExactEvalConfig(
        horizon=m["horizon"],
        params=ModelParams(lam=m["lam"], mu=m["mu"]),
        pi1=pi1,
        pi2=pi2,
        cost=parse_cost(m["cost"]),
        convention=Convention(m["convention"]),
    )
    cost = exact_finite_cost(m["policy"], config)
    from .belief import CommonInfo
    from .belief import propagate_arrivals_departures as _prop

    info = CommonInfo.from_pre_decision(
        _prop(pi1, config.params, config.convention),
        _prop(pi2, config.params, config.convention),
    )
    payload = {
        "policy": m["policy"],
        "horizon": m["horizon"],
        "cost": cost,
        "convention": m["convention"],
        "th0": str(info.threshold),
    }
    if args.with_dp:
        payload["dp_optimum"] = centralized_dp(config).optimal_cost
    _emit(payload, m.get("out"))
    return 0


def _cmd_steady(args) -> int:
    m = _resolve(args)
    params = ModelParams(lam=m["lam"], mu=m["mu"])
    cost = parse_cost(m["cost"])
    conv = Convention(m["convention"])
    cap = int(m["cap"])
    chain = build_s_chain(params, cap, conv)
    payload = {
        "lambda": m["lam"],
        "mu": m["mu"],
        "cost_name": cost.name,
        "j_ghat": infinite_cost_ghat(params, cost, cap, conv),
        "j_g0": infinite_cost_g0(params, cost, cap, conv),
        "cap": cap,
        "tail_mass": chain.tail_mass,
        "convention": m["convention"],
    }
    _emit(payload, m.get("out"))
    return 0


def _cmd_compare(args) -> int:
    m = _resolve(args)
    params = ModelParams(lam=m["lam"], mu=m["mu"])
    conv = Convention(m["convention"])
    pi1, pi2, _ = _parse_init(m["init"])
    if args.coupling:
        dist = verify_distribution_match(
            params, pi1, pi2,
            horizon=max(20, min(m["horizon"], 200)),
            replications=max(10_000, m["replications"]),
            seed=m["seed"],
            convention=conv,
        )
        cdom = verify_cost_dominance(
            params, parse_cost(m["cost"]), pi1, pi2,
            horizon=m["horizon"], replications=max(1, m["replications"]),
            seed=m["seed"], convention=conv,
        )
        payload = {
            "distribution_match": {
                "within_band": dist.within_band,
                "tv": {f"t={t},q={q}": [tv, band] for (t, q), (tv, band) in dist.tv.items()},
            },
            "cost_dominance": {
                "violations": cdom.violations,
                "case1_events": cdom.case1_events,
                "replications": cdom.replications,
            },
        }
        _emit(payload, m.get("out"))
        return 0 if (dist.within_band and cdom.violations == 0) else 1
    config = ExactEvalConfig(
        horizon=min(m["horizon"], 6),
        params=params,
        pi1=pi1,
        pi2=pi2,
        cost=parse_cost(m["cost"]),
        convention=conv,
    )
    report = verify_dominance_smallcase(["g0", "gtilde"], config)
    payload = {
        "baseline": report.baseline,
        "horizon": report.horizon,
        "comparisons": report.comparisons,
        "ok": report.ok,
    }
    _emit(payload, m.get("out"))
    return 0 if report.ok else 1


def _cmd_t0(args) -> int:
    m = _resolve(args)
    config = _experiment_config(m)
    result = measure_t0(config)
    result["histogram"] = {str(k): v for k, v in sorted(result["histogram"].items())}
    _emit(result, m.get("out"))
    return 1 if result["post_t0_gap_violations"] else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qroute", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo replications of a policy")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("exact", help="exact finite-horizon expected cost")
    _add_common(p)
    p.add_argument("--with-dp", action="store_true", help="also report the DP optimum")
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("steady", help="long-run average costs from stationary solves")
    _add_common(p)
    p.set_defaults(func=_cmd_steady)

    p = sub.add_parser("compare", help="dominance checks (exact small case or coupling)")
    _add_common(p)
    p.add_argument("--coupling", action="store_true", help="pathwise coupling checks")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("t0", help="empirical law of the balancing time")
    _add_common(p)
    p.set_defaults(func=_cmd_t0)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except QrouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
