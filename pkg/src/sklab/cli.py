"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 invalid model, 3 numerical precondition,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from sklab import asymptotics as ae
from sklab.cyclic import cyclic_integral, link_check, pure_product, xdep_fn
from sklab.expr import ExprError
from sklab.extraction import (
    FitSpec,
    compare_to_prediction,
    fit_expansion,
    fit_report_json,
    model_oscillation,
    sample_lndet,
)
from sklab.kernel import ConvergenceError, PreconditionError, assemble, lndet, trace_power
from sklab.modelfile import ModelFileError, load_model
from sklab.numerics import PoleError, RankDeficiencyError
from sklab.xdep import ReductionError

EXIT_USAGE, EXIT_MODEL, EXIT_NUMERIC, EXIT_VERIFY = 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _c(z):
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _emit(doc):
    print(json.dumps(doc, indent=2, default=_default))


def _default(v):
    if isinstance(v, complex):
        return _c(v)
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v).__name__)


# ---------------------------------------------------------------- commands

def cmd_detval(args):
    lm = load_model(args.model)
    if lm.model.gamma == 0:
        _emit({"re": 0.0, "im": 0.0, "order_used": args.order or lm.model.quad_order})
        return 0
    val, order = lndet(lm.model, args.x, order=args.order, tol=args.tol)
    _emit({"re": val.real, "im": val.imag, "order_used": order})
    return 0


def cmd_trace(args):
    lm = load_model(args.model)
    val = trace_power(assemble(lm.model, args.x, args.order), args.n)
    _emit({"n": args.n, "x": args.x, "re": val.real, "im": val.imag})
    return 0


def _fn_for(lm, x, n, source):
    if source == "xdep":
        if lm.family is None:
            raise UsageError("model file has no xdep_family")
        return xdep_fn(lm.family, x, n)
    return pure_product(lm.model.phi_or_derived, lm.model.g, n)


def _trail(res):
    return [{"nodes_per_side": a, "segment_order": b, "value": _c(v)} for a, b, v in res.trail]


def cmd_cyclic(args):
    lm = load_model(args.model)
    fn = _fn_for(lm, args.x, args.n, args.function)
    res = cyclic_integral(fn, lm.model, args.x, args.n, delta=args.delta)
    _emit({"n": args.n, "x": args.x, "value": _c(res.value), "rel_change": res.rel_change,
           "trail": _trail(res)})
    return 0


def cmd_link(args):
    lm = load_model(args.model)
    rep = link_check(lm.model, args.x, args.n, delta=args.delta)
    ok = rep.rel_err <= args.tol
    _emit({"n": args.n, "x": args.x, "cyclic": _c(rep.lhs), "trace": _c(rep.rhs),
           "rel_err": rep.rel_err, "tol": args.tol, "passed": ok, "trail": _trail(rep.cyclic)})
    return 0 if ok else EXIT_VERIFY


def _parse_terms(spec):
    """'leading,g,osc0,lemma1:3,corr:2,1' -> [('leading',), ..., ('corr', 2, 1)]."""
    out = []
    for tok in [t.strip() for t in spec.split(",") if t.strip()]:
        if tok.isdigit() and out and out[-1][0] == "corr" and len(out[-1]) == 2:
            out[-1] = out[-1] + (int(tok),)
            continue
        name, _, arg = tok.partition(":")
        if name in ("leading", "g", "osc0"):
            if arg:
                raise UsageError(f"term {name!r} takes no argument")
            out.append((name,))
        elif name == "lemma1":
            if not arg.isdigit() or int(arg) < 1:
                raise UsageError("lemma1 needs a positive integer, e.g. lemma1:2")
            out.append((name, int(arg)))
        elif name == "corr":
            if not arg.isdigit():
                raise UsageError("corr needs n,N, e.g. corr:2,1")
            out.append((name, int(arg)))
        else:
            raise UsageError(f"unknown term {name!r}")
    for t in out:
        if t[0] == "corr" and len(t) != 3:
            raise UsageError("corr needs n,N, e.g. corr:2,1")
    return out


def cmd_ae_eval(args):
    lm = load_model(args.model)
    model, x = lm.model, args.x
    terms = _parse_terms(args.terms)
    conv = ae.calibrate_convention(model) if args.calibrate else ae.AS_PRINTED
    lead = ae.leading_terms(model, x, conv)
    out = []
    for t in terms:
        if t[0] in ("leading", "g"):
            term = lead[t[0]]
            out.append({"label": t[0], "amplitude": term.amplitude,
                        "value": term.value(x), "x_power": term.x_power})
        elif t[0] == "osc0":
            out.append({"label": "osc0", "value": ae.first_oscillating_term(model, x),
                        "O_tilde": {"+": ae.O_tilde(model, x, 0, 0, 1),
                                    "-": ae.O_tilde(model, x, 0, 0, -1)}})
        elif t[0] == "lemma1":
            out.append({"label": f"lemma1:{t[1]}", "value": ae.lemma1_term(model, t[1])})
        else:
            n, N = t[1], t[2]
            out.append({
                "label": f"corr:{n},{N}",
                "nonosc": {"nu0_squared": ae.corollary_nonosc(model, n, N, True),
                           "nu0": ae.corollary_nonosc(model, n, N, False)},
                "osc": {conv_name: {"+": ae.corollary_osc(model, x, n, N, 1, conv_name),
                                    "-": ae.corollary_osc(model, x, n, N, -1, conv_name)}
                        for conv_name in _osc_conventions(N)},
            })
    _emit({"x": x, "terms": out, "convention": conv.as_dict(),
           "conventions_in_force": vars(lm.conventions)})
    return 0


def _osc_conventions(N):
    return ae.INDEX_CONVENTIONS if N >= 2 else ("as_printed",)


def cmd_prop_eval(args):
    lm = load_model(args.model)
    if lm.family is None:
        raise UsageError("model file has no xdep_family")
    model, fam, x, n, N = lm.model, lm.family, args.x, args.n, args.N
    m = int(args.m)
    if m == 0:
        vals = {
            f"nu0_squared={sq}": {ve: ae.prop_nonosc_action(fam, model, x, n, N, sq, ve)
                                  for ve in ("N", "n")}
            for sq in (True, False)
        }
        doc = {"m": 0, "value": vals[f"nu0_squared={lm.conventions.nu0_squared}"]["N"],
               "variants": vals,
               "metadata": {"nu0_squared": lm.conventions.nu0_squared, "v_exponent": "N"}}
    else:
        vals = {c: ae.prop_osc_action(fam, model, x, n, N, m, c) for c in _osc_conventions(N)}
        doc = {"m": m, "value": vals[lm.conventions.index_convention]
               if lm.conventions.index_convention in vals else vals["as_printed"],
               "variants": vals,
               "metadata": {"sigma": m, "sigma_note": "sigma taken equal to m",
                            "index_convention": lm.conventions.index_convention}}
    doc.update({"x": x, "n": n, "N": N})
    _emit(doc)
    return 0


def cmd_fit(args):
    lm = load_model(args.model)
    model = lm.model
    spec = FitSpec(xmin=args.xmin, xmax=args.xmax, count=args.count,
                   oscillating=() if args.basis == "smooth" else (1, -1),
                   profile_multiplier=args.profile)
    omega, S = model_oscillation(model)
    spec.check_nyquist(omega)
    samples = sample_lndet(model, spec.grid)
    fit = fit_expansion(samples, spec, omega, S)
    conv = ae.calibrate_convention(model)
    pred = ae.leading_terms(model, conv=conv)
    match = {"leading": "x^1"}
    if spec.oscillating and model.gamma != 0:
        pred.terms.extend(ae.oscillating_terms(model))
        match.update({"osc+": "osc+", "osc-": "osc-"})
    comparison = compare_to_prediction(fit, pred, match)
    report = fit_report_json(fit, comparison)
    if args.csv:
        Path(args.csv).write_text(samples.to_csv(), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(report, encoding="utf-8")
    print(report)
    return 0


def cmd_verify(args):
    from sklab.verify import run

    checks = run(args.suite)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else 0


# ------------------------------------------------------------------ parser

def build_parser():
    p = _Parser(prog="sklab", description="Generalized sine kernel determinants and asymptotics.")
    p.add_argument("-v", "--verbose", action="store_true", help="log numerical progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_model(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--model", required=True, help="JSON model file")
        return sp

    sp = with_model("detval", "ln det(I + V) at one x")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--order", type=int, default=None)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.set_defaults(func=cmd_detval)

    sp = with_model("trace", "tr K^n of the reduced kernel")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--order", type=int, default=None)
    sp.set_defaults(func=cmd_trace)

    sp = with_model("cyclic", "cyclic integral I_n")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--n", type=int, choices=(1, 2), required=True)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--function", choices=("product", "xdep"), default="product")
    sp.set_defaults(func=cmd_cyclic)

    sp = with_model("link", "cyclic integral of the pure product against tr K^n")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--n", type=int, choices=(1, 2), required=True)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_link)

    sp = with_model("ae-eval", "closed-form asymptotic terms")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--terms", default="leading,g,osc0")
    sp.add_argument("--no-calibrate", dest="calibrate", action="store_false",
                    help="use the phase factors as written instead of calibrating")
    sp.set_defaults(func=cmd_ae_eval)

    sp = with_model("prop-eval", "leading actions on the x-dependent family")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--m", choices=("0", "1", "+1", "-1"), required=True)
    sp.set_defaults(func=cmd_prop_eval)

    sp = with_model("fit", "sample ln det and fit the expansion")
    sp.add_argument("--xmin", type=float, default=30.0)
    sp.add_argument("--xmax", type=float, default=120.0)
    sp.add_argument("--count", type=int, default=180)
    sp.add_argument("--basis", choices=("default", "smooth"), default="default")
    sp.add_argument("--profile", type=int, choices=(1, 2), default=2,
                    help="oscillating x-power multiplier of (nu_+ + nu_-)")
    sp.add_argument("--csv", help="write samples here")
    sp.add_argument("--json", help="write the fit report here")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("verify", help="run the invariant suites on the shipped fixtures")
    sp.add_argument("--suite", choices=("all", "kernel", "asymptotics", "cyclic", "xdep"),
                    default="all")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sklab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelFileError, ExprError) as exc:
        print(f"sklab: invalid model: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (PreconditionError, ConvergenceError, PoleError, RankDeficiencyError,
            ReductionError, ae.AmbiguityError) as exc:
        print(f"sklab: numerical precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"sklab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
