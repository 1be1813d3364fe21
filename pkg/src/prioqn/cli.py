"""Command-line entry point: ``prioqn <command> --input FILE [options]``.

Exit status is 0 on success, 1 for unreadable or invalid input, and 2
when the command needs a stable network and the input is not.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import (CapTooSmall, ConfigError, NotIrreducible, ParseError,
                     ShapeError, SingularRouting, Unstable, ValidationError)
from .model import solve_traffic
from .oracle import (build_generator, compare_to_product_form, default_caps,
                     paper_balance_residual, random_states, stationary_solve)
from .productform import marginal_moments, solve_product_form, stability_check
from .specfile import bundled_names, load_spec
from .srbm import comparison_table
from .tables import OutputTable

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE = 0, 1, 2


def _label(spec, k):
    return f"({spec.rank_of(k) + 1},{spec.station_of(k) + 1})"


def _emit(tables, fmt, out):
    parts = [t.render(fmt) for t in tables]
    out.write(("\n" if fmt == "text" else "\r\n").join(parts))


def _parse_state(text, K):
    try:
        state = [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"--state {text!r}: expected comma-separated integers") from None
    if len(state) != K or min(state) < 0:
        raise ConfigError(f"--state {text!r}: need {K} nonnegative integers")
    return state


def cmd_analyze(args, spec, variability, out):
    traffic = solve_traffic(spec)
    pf = solve_product_form(spec, traffic)
    rows = OutputTable(f"Product-form marginals: {spec.name}",
                       ["class", "(type,station)", "lambda", "P0", "tail_ratio", "mean", "variance", "kappa(1..c)"])
    for k, m in enumerate(pf.marginals):
        mean, var = marginal_moments(m)
        kap = " ".join(f"{v:.4f}" for v in pf.kappas[k].values)
        rows.add_row(k + 1, _label(spec, k), float(traffic.lam[k]), m.p0, m.tail_ratio, mean, var, kap)
    tables = [rows]
    if args.state:
        joint = OutputTable("Joint probabilities", ["state", "probability"], decimals=args.decimals)
        for text in args.state:
            state = _parse_state(text, spec.num_classes)
            joint.add_row(",".join(map(str, state)), pf.probability(state))
        tables.append(joint)
    _emit(tables, args.format, out)
    return EXIT_OK


def cmd_stability(args, spec, variability, out):
    traffic = solve_traffic(spec)
    rep = stability_check(spec, traffic)
    st = OutputTable(f"Station intensities: {spec.name}", ["station", "servers", "rho", "ok"])
    for j, r in enumerate(rep.rho):
        st.add_row(j + 1, int(spec.servers[j]), r, r < 1)
    cl = OutputTable("Capacity ratios lambda/(kappa(n) mu)",
                     ["class", "(type,station)", "ratio_n1", "ratio_tail", "ok"], decimals=5)
    for k, e in enumerate(rep.classes):
        if e is None:
            cl.add_row(k + 1, _label(spec, k), None, None, "not computed")
        else:
            cl.add_row(k + 1, _label(spec, k), e.worst_ratio, e.tail_ratio, e.tail_ratio < 1)
    verdict = OutputTable("Verdict", ["stable", "every_level_below_one", "first_failure"])
    fail = "" if rep.first_failure is None else f"{rep.first_failure[0]} {rep.first_failure[1] + 1} ({rep.first_failure[2]:.5f})"
    verdict.add_row("stable" if rep.stable else "unstable", rep.strict, fail)
    _emit([st, cl, verdict], args.format, out)
    return EXIT_OK


def cmd_compare(args, spec, variability, out):
    table = comparison_table(spec, variability, table_compat=args.table_compat,
                             title=f"EXACT vs SRBM: {spec.name}" + (" (table-compat)" if args.table_compat else ""))
    _emit([table], args.format, out)
    return EXIT_OK


def _caps(args, spec, pf):
    if not args.caps:
        return default_caps(spec, pf)
    if len(args.caps) == 1:
        return tuple(args.caps * spec.num_classes)
    if len(args.caps) != spec.num_classes:
        raise ConfigError(f"--caps needs 1 or {spec.num_classes} values")
    return tuple(args.caps)


def cmd_oracle(args, spec, variability, out):
    traffic = solve_traffic(spec)
    pf = solve_product_form(spec, traffic)
    caps = _caps(args, spec, pf)
    chain = build_generator(spec, caps, traffic)
    res = compare_to_product_form(stationary_solve(chain, traffic), pf)
    samples = random_states(spec, args.samples, seed=args.seed or 0)
    balance = paper_balance_residual(spec, pf, samples)

    per = OutputTable(f"Product form vs truncated CTMC: {spec.name}",
                      ["class", "(type,station)", "cap", "product_form_mean", "oracle_mean", "gap"])
    for k in range(spec.num_classes):
        per.add_row(k + 1, _label(spec, k), caps[k], float(res.pf_means[k]),
                    float(res.oracle_means[k]), float(res.mean_gaps[k]))
    summary = OutputTable("Summary", ["quantity", "value"])
    sci = lambda x: f"{x:.3e}"
    summary.add_row("states", chain.num_states)
    summary.add_row("stationary_residual", sci(res.residual))
    summary.add_row("total_variation", sci(res.tv))
    summary.add_row("escaped_mass", sci(res.escaped_mass))
    summary.add_row("lost_flux", sci(res.lost_flux))
    summary.add_row("balance_residual", sci(balance))
    summary.add_row("balance_within_tolerance", bool(balance <= args.tolerance))
    _emit([per, summary], args.format, out)
    return EXIT_OK


def cmd_simulate(args, spec, variability, out):
    from .sim import SimConfig, run_experiment

    if args.seed is None:
        raise ConfigError("simulate requires --seed")
    traffic = solve_traffic(spec)
    for j, r in enumerate(traffic.rho):
        if r >= 1:
            raise Unstable(f"station {j + 1} has traffic intensity {r:.6g} >= 1")
    config = SimConfig(spec, events=None if args.horizon else args.events, horizon=args.horizon,
                       warmup=args.warmup, replications=args.replications, seed=args.seed)
    result = run_experiment(config, kernel=args.kernel, workers=args.workers)

    def pair(est, i):
        hw = None if est.half_width is None else float(est.half_width[i])
        return float(est.mean[i]), hw

    cl = OutputTable(f"Simulation: {spec.name} ({config.replications} x "
                     f"{config.events or config.horizon} {'events' if config.events else 'time units'})",
                     ["class", "(type,station)", "mean_queue", "ci95_half", "mean_sojourn", "ci95_half", "P(empty)"])
    for k in range(spec.num_classes):
        q = pair(result["mean_queue"], k)
        t = pair(result["mean_sojourn"], k)
        cl.add_row(k + 1, _label(spec, k), *q, *t, float(result["p_empty_class"].mean[k]))
    st = OutputTable("Stations", ["station", "utilization", "ci95_half", "P(empty)", "ci95_half"])
    for j in range(spec.num_stations):
        st.add_row(j + 1, *pair(result["utilization"], j), *pair(result["p_empty_station"], j))
    _emit([cl, st], args.format, out)
    return EXIT_OK


COMMANDS = {
    "analyze": (cmd_analyze, "product-form marginals, moments and joint probabilities"),
    "stability": (cmd_stability, "traffic intensities and capacity ratios"),
    "compare": (cmd_compare, "EXACT vs SRBM table for a single-server priority station"),
    "oracle": (cmd_oracle, "truncated-CTMC check of the product form"),
    "simulate": (cmd_simulate, "discrete-event simulation with confidence intervals"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prioqn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", required=True,
                       help="network file, or a bundled example: " + ", ".join(bundled_names()))
        p.add_argument("--format", choices=("text", "csv"), default="text")
        p.add_argument("--caps", type=int, nargs="+", help="truncation cap (one for all classes, or one per class)")
        p.add_argument("--tolerance", type=float, default=1e-10, help="balance-identity tolerance")
        p.add_argument("--seed", type=int, help="random seed (required by simulate)")
        p.add_argument("--replications", type=int, default=20)
        p.add_argument("--events", type=int, default=1_000_000, help="event budget per replication")
        p.add_argument("--horizon", type=float, help="simulated time per replication (instead of --events)")
        p.add_argument("--warmup", type=float, default=0.2, help="discarded fraction of each run")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--kernel", choices=("cython", "python"), help="simulation kernel (default: fastest available)")
        p.add_argument("--samples", type=int, default=200, help="random states for the balance check")
        p.add_argument("--state", action="append", help="comma-separated state for a joint-probability query")
        p.add_argument("--decimals", type=int, default=10, help="digits for joint probabilities")
        p.add_argument("--table-compat", action="store_true",
                       help="aggregate sojourn times as ET1 + ETk, as in the published table")
    return parser


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    handler = COMMANDS[args.command][0]
    try:
        spec, variability = load_spec(args.input)
        return handler(args, spec, variability, out)
    except (ParseError, ValidationError, ConfigError, ShapeError, CapTooSmall, SingularRouting,
            NotIrreducible) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID
    except Unstable as exc:
        err.write(f"unstable: {exc}\n")
        return EXIT_UNSTABLE


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
