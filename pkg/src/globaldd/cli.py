"""Command-line interface: ``globaldd simulate | verify | sweep``.

Exit codes: 0 success, 1 failed check or numerical guard, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .effective import iterated_reduction, reduction_factor
from .magnus import BranchCutError
from .simulator import decay_rate_ratio, run_experiment, write_trace_csv
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SWEEP_PARAMS = ("theta", "delta_t", "gradient-ratio")


def _load_doc(args) -> dict:
    doc = cfgmod.load(args.config) if args.config else cfgmod.loads("{}")
    for assignment in args.set or ():
        doc = cfgmod.apply_override(doc, assignment)
    if args.seed is not None:
        doc = cfgmod.apply_override(doc, f"noise.seed={args.seed}")
    if getattr(args, "out", None):
        doc["output"]["dir"] = args.out
    return doc


def _fit_summary(fit) -> dict:
    return {"rate_per_s": fit.rate, "model": fit.model, "quadratic": fit.quadratic,
            "linear": fit.linear, "n_points": fit.n_points}


def cmd_simulate(args) -> int:
    doc = _load_doc(args)
    exp = cfgmod.build_experiment(doc)
    out = Path(doc["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    dec, free = run_experiment(exp)
    for trace in (dec, free):
        trace.metadata["config_document"] = doc
    write_trace_csv(out / doc["output"]["decoupled_csv"], dec, __version__)
    write_trace_csv(out / doc["output"]["free_csv"], free, __version__)
    try:
        ratio, f, g = decay_rate_ratio(free, dec)
    except ValueError as exc:
        print(f"decay fit failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    summary = {"free": _fit_summary(f), "decoupled": _fit_summary(g),
               "rate_ratio": ratio if math.isfinite(ratio) else None,
               "seed": exp.noise.seed if exp.noise else None, "version": __version__}
    (out / doc["output"]["summary"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"free rate {f.rate:.4g} /s, decoupled rate {g.rate:.4g} /s ({f.model}), ratio {ratio:.4g}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    rows = run_suite(args.suite, seed=args.seed or 0)
    width = max(len(r.name) for r in rows)
    print(f"{'check':<{width}}  {'value':>11}  {'allowed':>21}  ok    form")
    for r in rows:
        allowed = f"[{r.low:.3g}, {r.high:.3g}]"
        print(f"{r.name:<{width}}  {r.value:11.4e}  {allowed:>21}  {'yes' if r.ok else 'NO ':<4}  {r.form}")
    failed = [r for r in rows if not r.ok]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def _sweep_doc(doc: dict, param: str, value: float) -> dict:
    if param == "theta":
        return cfgmod.apply_override(doc, f"pulse.theta={value!r}")
    if param == "delta_t":
        return cfgmod.apply_override(doc, f"pulse.delta_t_s={value!r}")
    zeeman = [w * value for w in doc["register"]["zeeman_hz"]]
    return cfgmod.apply_override(doc, f"register.zeeman_hz={json.dumps(zeeman)}")


def cmd_sweep(args) -> int:
    doc = _load_doc(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise cfgmod.ConfigError("--values needs at least one number")
    if args.iterations < 1:
        raise cfgmod.ConfigError("--iterations must be at least 1")
    rows = []
    for v in values:
        d = _sweep_doc(doc, args.parameter, v)
        if args.decay == "static":
            d = cfgmod.apply_override(d, "noise.enabled=false")
        exp = cfgmod.build_experiment(d)
        if exp.params.theta <= 0:
            raise cfgmod.ConfigError("the sweep needs theta > 0")
        residual = float(np.mean(iterated_reduction(exp.register, exp.params, args.iterations)))
        law = reduction_factor(exp.params.theta) ** args.iterations
        ratio = math.nan
        if args.decay != "none" and args.iterations == 1:
            dec, free = run_experiment(exp)
            ratio = decay_rate_ratio(free, dec)[0]
        rows.append((v, residual, law, ratio))
    m = np.array([r[2] for r in rows])
    y = np.array([r[1] for r in rows])
    c = float(y @ m / (m @ m))
    lines = [f"{args.parameter},residual_coupling,theta_law,decay_rate_ratio"]
    lines += [f"{v!r},{r!r},{law!r},{ratio!r}" for v, r, law, ratio in rows]
    lines.append(f"# fit residual_coupling = c * (4/3 theta^2)^{args.iterations}: c = {c:.6g}")
    text = "\n".join(lines) + "\n"
    out = Path(doc["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep_{args.parameter}.csv").write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (defaults reproduce the 2x2 lattice run)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value, e.g. pulse.theta=0.025 (repeatable)")
    common.add_argument("--seed", type=int, help="noise seed")
    common.add_argument("--out", help="output directory")

    parser = argparse.ArgumentParser(prog="globaldd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the free vs decoupled ensemble experiment")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="run numerical self-checks")
    p.add_argument("suite", nargs="?", default="all", choices=list(SUITES) + ["all"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="residual coupling and decay-rate ratio over a parameter")
    p.add_argument("parameter", choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated parameter values")
    p.add_argument("--iterations", type=int, default=1, help="nesting depth of the decoupling")
    p.add_argument("--decay", choices=("none", "static", "noisy"), default="static",
                   help="decay-rate column: skip, noise-free run, or run with the configured noise")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BranchCutError as exc:
        print(f"numerical guard (principal logarithm): {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical guard ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
