"""Command-line front end.

    feasrestore --case case57 --beta 1.6                 # one solve, per-bus report
    feasrestore --case case57 --beta 1.0,1.2,1.4          # impedance sweep table
    feasrestore --case case300 --vmin 0.92 --vmax 1.08 --n-minus-1 --jobs 4
    feasrestore --case case300 --n-minus-1 --generators

Exit status: 0 on success, 1 when a requested solve does not converge, 2 on
bad input (unreadable case, malformed flags, invalid contingency).
"""

from __future__ import annotations

import argparse
import sys

from . import matpower_io as mio
from . import report, study
from .errors import CaseFormatError, ContingencyError, NetworkError
from .network import build_network
from .restoration import build_restoration, decode_plan
from .solver import SlpConfig, record_json, solve


class _UsageError(Exception):
    pass


def _float_list(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("the list is empty")
    return vals


def build_parser():
    ap = argparse.ArgumentParser(
        prog="feasrestore",
        description="Minimum load shedding that makes AC power-flow equations solvable.",
    )
    ap.add_argument("--case", required=True, help="MATPOWER case file, or a bundled name (case57, case118, case300)")
    what = ap.add_mutually_exclusive_group()
    what.add_argument("--beta", type=_float_list, help="impedance scale factor(s), comma separated")
    what.add_argument("--line", type=int, help="remove this branch (1-based row) and solve")
    what.add_argument("--gen", type=int, help="remove this generator (1-based row) and solve")
    what.add_argument("--n-minus-1", action="store_true", help="screen all single outages")
    ap.add_argument("--generators", action="store_true", help="with --n-minus-1: generator outages instead of lines")
    ap.add_argument("--vmin", type=float, default=0.94, help="lower voltage bound on demand buses (p.u.)")
    ap.add_argument("--vmax", type=float, default=1.06, help="upper voltage bound on demand buses (p.u.)")
    ap.add_argument("--no-active-set", action="store_true", help="pure trust-region iterations")
    ap.add_argument("--trace", action="store_true", help="per-iteration JSON lines on stderr")
    ap.add_argument("--format", choices=("text", "csv", "json"), default="text")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--dump-case", action="store_true", help="print the (disrupted) case as JSON and exit")
    ap.add_argument("--plot", metavar="DIR", help="write PNG figures into DIR")
    ap.add_argument("--max-iter", type=int, default=200, help="trust-region iteration cap")
    ap.add_argument("--epsilon", type=float, default=1e-3, help="flat-region tolerance on predicted reduction per unit radius")
    ap.add_argument("--rho-lo", type=float, default=0.1, help="smallest agreement ratio that accepts a step")
    ap.add_argument("--eta-lo", type=float, default=0.25, help="shrink the radius below this ratio")
    ap.add_argument("--eta-hi", type=float, default=0.75, help="grow the radius above this ratio")
    ap.add_argument("--tweaks", type=int, default=10, help="tweak budget per Newton step")
    return ap


def _config(args):
    try:
        return SlpConfig(
            rho_lo=args.rho_lo,
            eta_lo=args.eta_lo,
            eta_hi=args.eta_hi,
            epsilon=args.epsilon,
            max_iter=args.max_iter,
            as_enabled=not args.no_active_set,
            T=args.tweaks,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _contingency(args):
    if args.line is not None:
        return mio.Contingency.line(args.line)
    if args.gen is not None:
        return mio.Contingency.generator(args.gen)
    if args.beta and len(args.beta) == 1:
        try:
            return mio.Contingency.scale(args.beta[0])
        except ValueError as exc:
            raise _UsageError(str(exc)) from None
    return mio.Contingency()


def _emit(text, out):
    out.write(text)
    if not text.endswith("\n"):
        out.write("\n")


def _trace_logger(err):
    def log(rec):
        err.write(record_json(rec) + "\n")
    return log


def cmd_solve(args, case, out, err):
    cont = _contingency(args)
    damaged = mio.apply_contingency(case, cont)
    if args.dump_case:
        _emit(damaged.to_json(sort_keys=True), out)
        return 0
    net = build_network(damaged)
    prob = build_restoration(net, args.vmin, args.vmax)
    rep = solve(prob, _config(args), log=_trace_logger(err) if args.trace else None)
    plan = decode_plan(prob, rep.x, diagnostics={
        "status": rep.status,
        "iterations": rep.iterations,
        "pivots": rep.pivots,
        "as_iterations": rep.as_iterations,
        "as_tweaks": rep.as_tweaks,
        "wall_time": rep.wall_time,
        "kkt": rep.kkt,
    })
    if args.format == "csv":
        _emit(plan.to_csv(), out)
    elif args.format == "json":
        _emit(plan.to_json(indent=2), out)
    else:
        label = study.generator_label(case, args.gen) if args.gen is not None else cont.label()
        _emit(report.plan_text(plan, rep, title=f"{case.name}  {label}"), out)
    if args.plot:
        report.write_figures(args.plot, report=rep, plan=plan, stem=f"{case.name}_{cont.label().replace(' ', '_')}")
    if not rep.converged:
        err.write(f"restoration did not converge ({rep.status})\n")
        return 1
    return 0


def _emit_rows(args, rows, header, out):
    if args.format == "csv":
        _emit(report.rows_csv(rows), out)
    elif args.format == "json":
        _emit(report.rows_json(rows), out)
    else:
        _emit(report.rows_text(rows, header=header), out)


def cmd_sweep_beta(args, case, out, err):
    rows = study.beta_sweep(case, args.beta, args.vmin, args.vmax, _config(args), jobs=args.jobs)
    _emit_rows(args, rows, "beta", out)
    if args.plot:
        report.write_figures(args.plot, rows=rows, stem=f"{case.name}_beta")
    return 0 if all(r.converged for r in rows) else 1


def cmd_nminus1(args, case, out, err):
    cfg = _config(args)
    if args.generators:
        rows = study.generator_outages(case, args.vmin, args.vmax, cfg, jobs=args.jobs)
        header = "generator removed"
    else:
        rows = study.line_outages(case, args.vmin, args.vmax, cfg, jobs=args.jobs)
        header = "line removed"
    _emit_rows(args, rows, header, out)
    if args.plot:
        report.write_figures(args.plot, rows=rows, stem=f"{case.name}_n1")
    return 0


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if not 0 < args.vmin < args.vmax:
            raise _UsageError("need 0 < vmin < vmax")
        if args.jobs < 1:
            raise _UsageError("--jobs must be at least 1")
        if args.generators and not args.n_minus_1:
            raise _UsageError("--generators only applies with --n-minus-1")
        case = mio.read_case(args.case)
        if args.n_minus_1:
            return cmd_nminus1(args, case, out, err)
        if args.beta and len(args.beta) > 1:
            return cmd_sweep_beta(args, case, out, err)
        return cmd_solve(args, case, out, err)
    except (OSError, CaseFormatError, ContingencyError, NetworkError, _UsageError) as exc:
        err.write(f"error: {exc}\n")
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
