"""Command-line front end.

Exit codes: 0 success (or a ``survives`` verdict), 1 invalid input,
2 numerically undecided, 3 a check failed, 4 an ``extinct`` verdict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from ._accel import backend_name
from .branching import DELTA_SURVIVE, extinction_probs, survival_probs, survival_verdict
from .brw import BRWLaw
from .corpus import REGISTRY, build_example
from .critical import Certificate, check_certificate, critical_report
from .genfun import parameter_estimates
from .graph import KernelError, load_kernel, save_kernel
from .reproduce import CHECKS
from .sim import SimConfig, estimate_survival

EXIT_OK, EXIT_INPUT, EXIT_UNDECIDED, EXIT_FAILED, EXIT_EXTINCT = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _meta(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "usage")}
    return {"tool": "brwcrit", "version": __version__, "backend": backend_name(),
            "config": cfg, "seed": cfg.get("seed")}


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(args, header, rows, extra=()):
    buf = io.StringIO()
    buf.write(f"# {json.dumps(_meta(args), sort_keys=True)}\n")
    for line in extra:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(args, doc):
    return json.dumps({"meta": _meta(args), **doc}, indent=1, sort_keys=True) + "\n"


def _num(v):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _window(K, size):
    if K.is_finite:
        return K.window()
    if size is None:
        raise UsageError("generated kernels need --window")
    return K.window(size)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_params(args):
    K = load_kernel(args.kernel)
    w = _window(K, args.window) if (args.window or K.is_finite) else K.window(args.site + args.nmax + 1)
    est = parameter_estimates(K, args.site, n_max=args.nmax, w=w)
    rows = []
    for which, seq in (("Ms", est["ms_sequence"]), ("Mw", est["t_sequence"])):
        rows += [(int(n), repr(float(r)), which) for n, r in zip(seq.ns, seq.roots)]
    extra = [f"estimate {k} = {est[k]!r}" for k in ("Ms", "Mw", "Mw_minus")]
    if args.target is not None and args.target != args.site:
        from .genfun import estimate_parameters
        t = estimate_parameters(K, args.site, args.target, n_max=args.nmax, w=w, which="Ms")
        rows += [(int(n), repr(float(r)), "Ms_xy") for n, r in zip(t.ns, t.roots)]
        extra.append(f"estimate Ms(x,y) = {t.estimate!r}")
    _emit(_csv_text(args, ["n", "root", "which"], rows, extra), args.out)
    return EXIT_OK


def cmd_fixed_point(args):
    K = load_kernel(args.kernel)
    law = BRWLaw(K, args.lam, _window(K, args.window), args.boundary)
    if args.mode == "q":
        rep = extinction_probs(law, tol=args.tol, max_iter=args.max_iter, floor=DELTA_SURVIVE)
        q = float(rep.limit[args.site])
        if q >= 1 - DELTA_SURVIVE:
            verdict = "extinct"
        else:
            verdict = "survives" if rep.converged else "undecided"
    else:
        rep = survival_probs(law, tol=args.tol, max_iter=args.max_iter, floor=DELTA_SURVIVE)
        verdict = survival_verdict(rep, args.site)
    rows = [(x, repr(float(v)), rep.iterations, repr(rep.residual)) for x, v in enumerate(rep.limit)]
    extra = [f"verdict at site {args.site}: {verdict}", f"stop: {rep.reason}"]
    _emit(_csv_text(args, ["site", "value", "iterations", "residual"], rows, extra), args.out)
    return {"survives": EXIT_OK, "extinct": EXIT_EXTINCT, "undecided": EXIT_UNDECIDED}[verdict]


def cmd_critical(args):
    K = load_kernel(args.kernel)
    rep = critical_report(K, args.site, window=args.window, tol=args.tol, n_max=args.nmax)
    _emit(_json_text(args, rep.to_json()), args.out)
    return EXIT_UNDECIDED if not math.isfinite(rep.lambda_w_upper) else EXIT_OK


def _load_vector(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    v = doc["v"] if isinstance(doc, dict) else doc
    return np.asarray(v, dtype=float)


def cmd_certificate(args):
    K = load_kernel(args.kernel)
    if args.vector:
        cert = Certificate(_load_vector(args.vector), args.lam, args.kind, args.order, args.site)
    else:
        from .corpus import example4_certificate

        cert = Certificate(example4_certificate, args.lam, args.kind, args.order, args.site,
                           sites=args.sites)
    res = check_certificate(cert, K)
    doc = {"holds": res.holds, "violated_at": res.site, "slack": _num(res.slack),
           "kind": cert.kind, "order": cert.n, "lambda": cert.lam, "sites": cert.checked_sites}
    _emit(_json_text(args, doc), args.out)
    return EXIT_OK if res.holds else EXIT_FAILED


def cmd_simulate(args):
    if args.replicas < 1:
        sys.stderr.write(args.usage)
        raise UsageError("--replicas must be >= 1")
    K = load_kernel(args.kernel)
    law = BRWLaw(K, args.lam, _window(K, args.window))
    cfg = SimConfig(args.lam, args.site, args.replicas, args.seed,
                    "continuous" if args.continuous else "generations",
                    g_max=args.gens, horizon=args.horizon, p_max=args.pmax, r_local=args.rlocal)
    out = estimate_survival(law, cfg) if args.replicas >= 100 else _few(law, cfg)
    rows = list(out.rows())
    header = ["replica", "alive", "censored", "local", "ext_time", "births", "births_x0"]
    summary = {k: v for k, v in out.summary().items() if k != "config"}
    _emit(_csv_text(args, header, rows), args.csv)
    _emit(_json_text(args, summary), args.json)
    return EXIT_OK


def _few(law, cfg):
    from .sim import SimOutcome, _run, replica_seeds

    return SimOutcome(cfg, *_run(law, cfg, replica_seeds(cfg.seed, 0, cfg.replicas)))


def cmd_example(args):
    if args.list:
        lines = [f"{name}\t{spec.produces}\t{spec.note}" for name, spec in REGISTRY.items()]
        sys.stdout.write("\n".join(lines) + "\n")
        return EXIT_OK
    if not args.name:
        raise UsageError("example needs --name or --list")
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects k=v, got {item!r}")
        k, v = item.split("=", 1)
        params[k] = json.loads(v)
    try:
        obj = build_example(args.name, params)
    except KeyError as e:
        raise UsageError(str(e)) from None
    if REGISTRY[args.name].produces == "law":
        doc = {"kind": "law", "name": args.name, "params": {**REGISTRY[args.name].defaults, **params}}
        _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", args.emit)
        return EXIT_OK
    if args.emit in (None, "-"):
        sys.stdout.write(json.dumps(obj.to_json(args.window), indent=1) + "\n")
    else:
        save_kernel(obj, args.emit, args.window)
    return EXIT_OK


def cmd_reproduce(args):
    if args.example not in CHECKS:
        raise UsageError(f"no reproduction for example {args.example}; choose from {sorted(CHECKS)}")
    checks = CHECKS[args.example]()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="brwcrit", description="Critical values and survival of branching random walks.")
    p.add_argument("--version", action="version", version=f"brwcrit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("params", help="root sequences and M_s, M_w, M_w^- estimates (CSV)")
    s.add_argument("--kernel", required=True)
    s.add_argument("--site", type=int, required=True)
    s.add_argument("--target", type=int)
    s.add_argument("--nmax", type=int, default=64)
    s.add_argument("--window", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_params)

    s = sub.add_parser("fixed-point", help="extinction (q) or survival (v) probabilities (CSV)")
    s.add_argument("--kernel", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--window", type=int)
    s.add_argument("--mode", choices=("q", "v"), default="v")
    s.add_argument("--site", type=int, default=0)
    s.add_argument("--boundary", choices=("absorb", "escape"), default="absorb")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=10**6)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fixed_point)

    s = sub.add_parser("critical", help="critical-value report (JSON)")
    s.add_argument("--kernel", required=True)
    s.add_argument("--site", type=int, required=True)
    s.add_argument("--window", type=int)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--nmax", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("certificate", help="check a survival certificate (JSON)")
    s.add_argument("--kernel", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--kind", choices=("nonlinear", "linear", "iterated"), default="nonlinear")
    s.add_argument("--order", type=int, default=1)
    s.add_argument("--site", type=int, default=0)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--vector", help="JSON file with a list or {\"v\": [...]}")
    g.add_argument("--example4", action="store_true", help="use v(0)=1/2, v(n)=1/(n+1)")
    s.add_argument("--sites", type=int, default=512, help="sites checked for --example4")
    s.add_argument("--out")
    s.set_defaults(func=cmd_certificate)

    s = sub.add_parser("simulate", help="Monte Carlo survival (per-replica CSV + JSON summary)")
    s.add_argument("--kernel", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--site", type=int, default=0)
    s.add_argument("--replicas", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--window", type=int)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--continuous", action="store_true")
    g.add_argument("--generations", action="store_true")
    h = s.add_mutually_exclusive_group()
    h.add_argument("--horizon", type=float, default=50.0)
    h.add_argument("--gens", type=int, default=1000)
    s.add_argument("--pmax", type=int, default=1000)
    s.add_argument("--rlocal", type=int, default=50)
    s.add_argument("--csv", help="per-replica CSV path (default stdout)")
    s.add_argument("--json", help="summary JSON path (default stdout)")
    s.set_defaults(func=cmd_simulate, usage=s.format_usage())

    s = sub.add_parser("example", help="list or materialise named examples")
    s.add_argument("--list", action="store_true")
    s.add_argument("--name")
    s.add_argument("--param", action="append", metavar="K=V", help="JSON-valued parameter")
    s.add_argument("--window", type=int, help="materialise a generated kernel on 0..N-1")
    s.add_argument("--emit")
    s.set_defaults(func=cmd_example)

    s = sub.add_parser("reproduce", help="run the end-to-end checks for a named example")
    s.add_argument("--example", type=int, required=True, choices=sorted(CHECKS))
    s.set_defaults(func=cmd_reproduce)
    return p


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"brwcrit: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (KernelError, ValueError, KeyError, OSError) as e:
        print(f"brwcrit: error: {e}", file=sys.stderr)
        return EXIT_INPUT


def main(argv=None):
    sys.exit(run(argv))
