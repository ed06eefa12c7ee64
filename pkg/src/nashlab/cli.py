"""Command-line entry points.

Subcommands: exponents, ineq-suite, static-run, dynamic-run, exclusion,
tail, maximal.  Flags mirror the experiment spec fields; a flat
``key=value`` config file can preload any of them, with explicit flags
taking precedence.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import kernels
from .environments import component_rng, resampling_env
from .experiments import (
    ExperimentSpec,
    run_exclusion,
    run_static_moment,
    run_tail_estimate,
)
from .heat import dissipation_check, evolve_dynamic
from .inequalities import (
    hls_ratio,
    isoperimetric_ratio,
    nash_exponents,
    nash_ratio,
    poincare_sobolev_ratio,
    function_corpus,
    InequalityReport,
)
from .lattice import EdgeField, LatticeGeometry
from .maximal import lp_maximal_ratio, weak11_experiment
from .moderation import kernel_constants, check_moderation, weights_from_env
from .reporting import write_csv, write_json
from .svg import line_chart

__all__ = ["main"]


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line {raw!r}; expected key=value")
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _add_spec_flags(sub):
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--dim", type=int, default=None)
    sub.add_argument("--radius", type=int, default=None)
    sub.add_argument("--rho", type=float, default=None)
    sub.add_argument("--law", default=None)
    sub.add_argument("--horizon", type=float, default=None)
    sub.add_argument("--dt", type=float, default=None)
    sub.add_argument("--p", type=float, default=None)
    sub.add_argument("--q", type=float, default=None)
    sub.add_argument("--theta", type=float, default=None)
    sub.add_argument("--kernel-m", dest="kernel_m", type=float, default=None)
    sub.add_argument("--reals", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--svg", action="store_true", default=None)


_SPEC_TYPES = {
    "dim": int,
    "radius": int,
    "rho": float,
    "law": str,
    "horizon": float,
    "dt": float,
    "p": float,
    "q": float,
    "theta": float,
    "kernel_m": float,
    "reals": int,
    "seed": int,
    "out": str,
    "svg": lambda v: str(v).lower() in ("1", "true", "yes"),
}


def _build_spec(args, name: str, defaults: dict | None = None):
    merged = dict(defaults or {})
    if args.config:
        cfgfile = _read_config(args.config)
        for k, v in cfgfile.items():
            if k not in _SPEC_TYPES:
                raise ValueError(f"unknown config key {k!r}")
            merged[k] = _SPEC_TYPES[k](v)
    for k in _SPEC_TYPES:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    out = merged.pop("out", None)
    svg = bool(merged.pop("svg", False))
    spec_fields = {k: v for k, v in merged.items() if k in ExperimentSpec.__dataclass_fields__}
    return ExperimentSpec(name=name, **spec_fields), out, svg


def _require_out(out) -> str:
    if not out:
        raise SystemExit("this subcommand requires --out DIR")
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_exponents(args) -> int:
    q = math.inf if args.q_inf else args.q
    exps = nash_exponents(args.dim, args.p, q, args.theta)
    payload = exps.as_dict()
    if exps.beta > 0:
        k1, k01, ck = kernel_constants(args.kernel_m, exps)
        payload.update({"K_l1": k1, "K_l1_unit": k01, "CK": ck, "kernel_m": args.kernel_m})
    for key in sorted(payload):
        print(f"{key} = {payload[key]}")
    if args.json:
        write_json(args.json, payload)
    return 0


def _cmd_ineq_suite(args) -> int:
    spec, out, _ = _build_spec(args, "ineq-suite", {"radius": 16, "reals": 120})
    out = _require_out(out)
    reports = []
    rng = component_rng(spec.seed, "corpus")
    for L in (spec.radius, 2 * spec.radius):
        geom = LatticeGeometry(spec.dim, L)
        corpus = function_corpus(geom, spec.reals, spec.seed)
        w = EdgeField.constant(geom, 1.0)
        exps = nash_exponents(spec.dim, spec.p, spec.q, spec.theta)
        best, arg = 0.0, ""
        for f, desc in corpus:
            r = nash_ratio(f, w, exps)
            if r > best:
                best, arg = r, desc
        reports.append(
            InequalityReport("anchored-nash", "mixed", L, len(corpus), best, arg)
        )
        best, arg = 0.0, ""
        p_ps = 1.5 if spec.dim >= 2 else None
        if p_ps is not None and p_ps < spec.dim:
            for f, desc in corpus:
                r = poincare_sobolev_ratio(f, L, p_ps)
                if r > best:
                    best, arg = r, desc
            reports.append(
                InequalityReport("poincare-sobolev", "mixed", L, len(corpus), best, arg)
            )
        best, arg = 0.0, ""
        for k in range(len(corpus)):
            size = int(rng.integers(1, geom.site_mask(L).sum() // 2))
            sites = rng.choice(geom.n_sites, size=size, replace=False)
            A = np.zeros(geom.n_sites, dtype=bool)
            A[sites] = True
            r = isoperimetric_ratio(A, geom, L)
            if r > best:
                best, arg = r, f"random-set(size={size})"
            if r == math.inf:
                break
        reports.append(
            InequalityReport("isoperimetric", "random-sets", L, len(corpus), best, arg)
        )
        best, arg = 0.0, ""
        hls_n = min(len(corpus), 40)
        for f, desc in corpus[:hls_n]:
            r = hls_ratio(f, min(L, 16))
            if r > best:
                best, arg = r, desc
        reports.append(
            InequalityReport("kernel-pointwise", "mixed", min(L, 16), hls_n, best, arg)
        )
    write_json(os.path.join(out, "inequalities.json"), [r.as_dict() for r in reports])
    for r in reports:
        print(f"{r.name:18s} L={r.L:3d} best_constant={r.best_constant:.6g} ({r.argmax_descriptor})")
    return 0


def _cmd_static_run(args) -> int:
    spec, out, svg = _build_spec(args, "static-run", {"law": "power:8", "horizon": 50.0})
    out = _require_out(out)
    summary, traces, mqs = run_static_moment(spec, out_dir=out)
    print(f"realizations: {spec.reals}; sup-statistic moments: {summary.moments}")
    if svg:
        times = summary.times
        series = [("median t^{d/2} p00", times[1:], summary.per_time_median[1:])]
        line_chart(os.path.join(out, "decay.svg"), series, title="diffusive decay",
                   xlabel="t", ylabel="t^{d/2} p00")
    return 0


def _cmd_dynamic_run(args) -> int:
    spec, out, svg = _build_spec(
        args, "dynamic-run", {"law": "power:8", "horizon": 20.0, "radius": 8}
    )
    out = _require_out(out)
    rate = args.switch_rate
    cfg = spec.config()
    rows = []
    for i in range(spec.reals):
        env = resampling_env(
            spec.dim, spec.radius, spec.law, rate, spec.horizon, spec.seed, realization=i
        )
        grid = np.linspace(0.0, spec.horizon, int(round(spec.horizon / spec.dt)) + 1)
        w = weights_from_env(env, spec.kernel_m, grid)
        trace = evolve_dynamic(env, 0.0, None, spec.horizon, cfg,
                               weight_fields=(grid, w.values**2))
        trace.validate()
        trace.dump_csv(os.path.join(out, f"trace_{i:03d}.csv"))
        mod = check_moderation(trace, w, spec.kernel_m)
        write_json(os.path.join(out, f"moderation_{i:03d}.json"), mod.as_dict())
        checks = dissipation_check(env, None, spec.horizon, cfg, n_times=5, seed=spec.seed + i)
        worst = max(abs(fd - target) / abs(target) for _, fd, target in checks)
        rows.append((i, env.n_events, mod.c_emp, worst))
        if svg and i == 0:
            sel = trace.times >= 1.0
            line_chart(
                os.path.join(out, "energy_decay.svg"),
                [("t^{d/2} E_t", trace.times[sel],
                  trace.times[sel] ** (spec.dim / 2.0) * trace.E[sel]),
                 ("moderation ratio", mod.times[sel], mod.ratio[sel])],
                title="dynamic run", xlabel="t",
            )
    write_csv(os.path.join(out, "dynamic_runs.csv"),
              ["realization", "events", "c_emp", "dissipation_rel_err"], rows)
    write_json(os.path.join(out, "spec.json"),
               {**spec.as_dict(), "switch_rate": rate})
    print(f"{spec.reals} dynamic runs; worst dissipation identity error "
          f"{max(r[3] for r in rows):.2e}")
    return 0


def _cmd_exclusion(args) -> int:
    spec, out, svg = _build_spec(args, "exclusion")
    out = _require_out(out)
    summary, results, extras = run_exclusion(spec, out_dir=out)
    print(
        f"exclusion pipeline: {len(results)} realizations, "
        f"E[sup^4]={summary.moments['4']:.5g}, KS p={extras['ks_pvalue']:.3f}, "
        f"max moderation c_emp={max(extras['moderation_c_emp']):.4g}"
    )
    if svg:
        tr = results[0].trace
        sel = tr.times >= 1.0
        line_chart(
            os.path.join(out, "energy_decay.svg"),
            [("t^{d/2} E_t", tr.times[sel], tr.times[sel] ** (spec.dim / 2.0) * tr.E[sel])],
            title=f"exclusion rho={spec.rho}", xlabel="t",
        )
        mod = results[0].moderation
        line_chart(
            os.path.join(out, "moderation_ratio.svg"),
            [("ratio", mod.times[sel], mod.ratio[sel])],
            title="moderation ratio", xlabel="t",
        )
    return 0


def _cmd_tail(args) -> int:
    spec, out, _ = _build_spec(
        args, "tail", {"rho": 0.8, "radius": 6, "horizon": 40.0, "reals": 200}
    )
    out = _require_out(out)
    t_grid = [float(v) for v in args.t_grid.split(",")]
    rows, w_rows = run_tail_estimate(spec, t_grid, out_dir=out)
    for t, p in rows:
        print(f"P[open time by t={t:g} <= 1] ~= {p:.4f}")
    for u, p in w_rows:
        print(f"P[w_0 <= {u:g}] ~= {p:.4f}")
    return 0


def _cmd_maximal(args) -> int:
    spec, out, _ = _build_spec(args, "maximal", {"radius": 8, "reals": 10000})
    out = _require_out(out)
    lambdas = [float(v) for v in args.lambdas.split(",")]
    rows = []
    for law in args.laws.split(","):
        rows.extend(
            weak11_experiment(law, spec.dim, spec.radius, lambdas, spec.reals, spec.seed)
        )
    write_csv(
        os.path.join(out, "weak11.csv"),
        ["law", "d", "L", "lambda_or_p", "estimate", "stderr", "bound"],
        rows,
    )
    lp_rows = []
    for law in args.laws.split(","):
        ratio = lp_maximal_ratio(law, args.p_exp, spec.dim, spec.radius,
                                 spec.reals, spec.seed)
        lp_rows.append((law, spec.dim, spec.radius, args.p_exp, ratio, 0.0, math.nan))
    write_csv(
        os.path.join(out, "lp_ratio.csv"),
        ["law", "d", "L", "lambda_or_p", "estimate", "stderr", "bound"],
        lp_rows,
    )
    for row in rows:
        print(f"law={row[0]} lambda={row[3]:g}: lambda*P={row[4]:.4f} "
              f"bound={row[6]:.4f} (stderr {row[5]:.4f})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nashlab",
        description="numerical laboratory for heat-kernel decay in degenerate "
        "random environments",
    )
    parser.add_argument("--backend", choices=("numba", "numpy"), default=None,
                        help="informational; set NASHLAB_BACKEND before launch")
    subs = parser.add_subparsers(dest="command", required=True)

    p_exp = subs.add_parser("exponents", help="exponent algebra and kernel constants")
    p_exp.add_argument("--dim", type=int, default=2)
    p_exp.add_argument("--p", type=float, default=4.0)
    p_exp.add_argument("--q", type=float, default=8.0)
    p_exp.add_argument("--q-inf", action="store_true", help="use q = infinity")
    p_exp.add_argument("--theta", type=float, default=0.2)
    p_exp.add_argument("--kernel-m", dest="kernel_m", type=float, default=4.0)
    p_exp.add_argument("--json", default=None, help="also write the values here")
    p_exp.set_defaults(func=_cmd_exponents)

    p_ineq = subs.add_parser("ineq-suite", help="empirical inequality constants")
    _add_spec_flags(p_ineq)
    p_ineq.set_defaults(func=_cmd_ineq_suite)

    p_static = subs.add_parser("static-run", help="static moment-condition runs")
    _add_spec_flags(p_static)
    p_static.set_defaults(func=_cmd_static_run)

    p_dyn = subs.add_parser("dynamic-run", help="synthetic dynamic environments")
    _add_spec_flags(p_dyn)
    p_dyn.add_argument("--switch-rate", type=float, default=0.5,
                       help="per-edge resampling rate")
    p_dyn.set_defaults(func=_cmd_dynamic_run)

    p_exc = subs.add_parser("exclusion", help="exclusion-process pipeline")
    _add_spec_flags(p_exc)
    p_exc.set_defaults(func=_cmd_exclusion)

    p_tail = subs.add_parser("tail", help="vanishing-rate tail estimates")
    _add_spec_flags(p_tail)
    p_tail.add_argument("--t-grid", default="5,10,20,40")
    p_tail.set_defaults(func=_cmd_tail)

    p_max = subs.add_parser("maximal", help="maximal-function experiments")
    _add_spec_flags(p_max)
    p_max.add_argument("--laws", default="exp,pareto:1.5")
    p_max.add_argument("--lambdas", default="2,4,8")
    p_max.add_argument("--p-exp", dest="p_exp", type=float, default=2.0)
    p_max.set_defaults(func=_cmd_maximal)

    args = parser.parse_args(argv)
    if args.backend and args.backend != kernels.BACKEND:
        print(
            f"note: active backend is {kernels.BACKEND}; set NASHLAB_BACKEND="
            f"{args.backend} in the environment to switch",
            file=sys.stderr,
        )
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
