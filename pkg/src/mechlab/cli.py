"""Command-line entry point: ``mechlab <command> [flags]``.

Exit codes: 0 success, 1 domain failure (bad data, failed verification),
2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from fractions import Fraction

from . import __version__
from .env import EXPERT, DomainError, group_total, lab_environment, principal, worker_optimal
from .equilibrium import SizeError, enumerate_ex_post_equilibria, is_strategy_proof
from .mechanism import BUILTIN_NAMES, builtin, render
from .composition import random_suite
from .schema import ExperimentConfig, ParseError, encode_outcome, load_config, load_mechanism
from .simulation import ConfigError, SchemaError, metadata_json, read_csv, run_experiment, subject_counts, to_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Failure(Exception):
    """Domain failure reported on stderr with exit code 1."""


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _mechanism(args) -> object:
    if getattr(args, "file", None):
        return load_mechanism(args.file)
    return builtin(args.name)


# -- commands -------------------------------------------------------------------


def cmd_show_mechanism(args, out) -> int:
    out.write(render(_mechanism(args)))
    return EXIT_OK


EQ_COLUMNS = ("index", "profile", "ex_post", "dominant_strategy", "weakly_dominated_components", "induced_scf")


def _scf_text(env, scf) -> str:
    return "; ".join(f"{','.join(theta)}->{encode_outcome(scf(theta))}" for theta in env.type_profiles())


def cmd_equilibria(args, out) -> int:
    env = lab_environment()
    mech = _mechanism(args)
    reports = enumerate_ex_post_equilibria(env, mech)
    if args.format == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("mechanism", *EQ_COLUMNS))
        for k, r in enumerate(reports, start=1):
            writer.writerow((mech.name, k, r.profile.describe(), int(r.ex_post), int(r.dominant_strategy),
                             len(r.weakly_dominated_components), _scf_text(env, r.induced_scf)))
        return EXIT_OK
    out.write(f"mechanism: {mech.name}\nex-post equilibria: {len(reports)}\n")
    for k, r in enumerate(reports, start=1):
        flags = ["ex-post"]
        if r.dominant_strategy:
            flags.append("dominant-strategy")
        if r.weakly_dominated_components:
            parts = ", ".join(f"w{i + 1} {t}" for i, t in r.weakly_dominated_components)
            flags.append(f"weakly dominated components: {parts}")
        out.write(f"\n[{k}] {r.profile.describe()}\n    flags: {', '.join(flags)}\n    induced SCF:\n")
        for theta in env.type_profiles():
            out.write(f"      {','.join(theta)} -> {encode_outcome(r.induced_scf(theta))}\n")
    return EXIT_OK


def cmd_verify_composition(args, out) -> int:
    start = time.perf_counter()
    results = random_suite(args.trials, args.seed, include_lab=True)
    random_passed = 0
    failures = []
    for res in results:
        status = "PASS" if res.report.passed else "FAIL"
        if res.index == 0:
            out.write(f"trial 0 (laboratory instance, {len(res.report.checks)} equilibria): {status}\n")
        elif res.report.passed:
            random_passed += 1
        if not res.report.passed:
            failures.append(res)
        if args.verbose and res.index:
            out.write(f"trial {res.index}: {len(res.report.checks)} equilibria, {status}\n")
    for res in failures:
        for c in res.report.checks:
            if not c.passed:
                out.write(f"violation in trial {res.index}: delta {c.delta.describe()} "
                          f"ex_post={c.ex_post} scf_matches={c.scf_matches}\n")
    verdict = "PASS" if not failures else "FAIL"
    out.write(f"seed {args.seed}: {verdict}, {random_passed}/{args.trials} "
              f"({time.perf_counter() - start:.1f}s)\n")
    return EXIT_OK if not failures else EXIT_FAIL


def cmd_simulate(args, out) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    seed = cfg.seed if args.seed is None else args.seed
    dataset = run_experiment(cfg.grid, cfg.population, master_seed=seed, belief_mode=cfg.belief_mode,
                             workers=args.workers, session_options=cfg.session)
    text = to_csv(dataset)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        with open(args.out + ".meta.json", "w", encoding="utf-8", newline="") as fh:
            fh.write(metadata_json(dataset))
    except OSError as exc:
        raise Failure(f"{args.out}: {exc.strerror}") from None
    counts = subject_counts(dataset)
    out.write(f"seed: {seed}\n")
    out.write(f"sessions: {len(dataset.configs)}\n")
    by_mech: dict[str, int] = {}
    for c in dataset.configs:
        by_mech[c.mechanism] = by_mech.get(c.mechanism, 0) + 1
    for mech, n in by_mech.items():
        out.write(f"  {mech}: {n}\n")
    out.write(f"subjects: {counts['subjects']} ({counts['workers']} workers, {counts['staffers']} staffers)\n")
    out.write(f"records: {len(dataset.records)} group-periods\n")
    out.write(f"wrote {args.out}\n")
    return EXIT_OK


def cmd_analyze(args, out) -> int:
    from .analysis import (DataIntegrityError, InsufficientSessionsError, expert_claim_histogram, fit_models,
                           rank_tests, results_table, summary_rates)
    from .analysis.regression import coefficients_csv

    dataset = read_csv(args.data)
    models = args.model or ["eq-wo", "eq-truth", "action", "profit"]
    fits = fit_models(dataset, models, censoring=args.censoring)
    table = results_table(fits)
    out.write(table)
    os.makedirs(args.out, exist_ok=True)

    def path(name):
        return os.path.join(args.out, name)

    with open(path("regressions.txt"), "w", encoding="utf-8", newline="") as fh:
        fh.write(table)
    coefficients_csv(fits).to_csv(path("coefficients.csv"), index=False, lineterminator="\n")
    summary_rates(dataset).to_csv(path("summary_rates.csv"), index=False, lineterminator="\n")
    notes = []
    try:
        per, bins = expert_claim_histogram(dataset)
        per.to_csv(path("expert_claims_by_subject.csv"), index=False, lineterminator="\n")
        bins.to_csv(path("expert_claims_histogram.csv"), index=False, lineterminator="\n")
    except DataIntegrityError as exc:
        notes.append(f"expert-claim histogram skipped: {exc}")
    try:
        rank_tests(dataset).to_csv(path("rank_tests.csv"), index=False, lineterminator="\n")
    except InsufficientSessionsError as exc:
        notes.append(f"rank tests skipped: {exc}")
    for note in notes:
        out.write(f"note: {note}\n")
    out.write(f"wrote tables to {args.out}\n")
    return EXIT_OK


def cmd_report(args, out) -> int:
    env = lab_environment()
    f = principal(env)
    out.write(f"mechlab {__version__}\n\n")
    out.write(f"principal SCF strategy-proof: {is_strategy_proof(env, f)}\n\n")
    out.write("group totals (staffer + workers) by type profile\n")
    out.write("types  truthful  worker-optimal\n")
    g = worker_optimal(env)
    expected = Fraction(0)
    for theta in env.type_profiles():
        truth, wo = group_total(theta, f(theta), theta), group_total(theta, g(theta), (EXPERT, EXPERT))
        expected += Fraction(truth, 4)
        out.write(f"{','.join(theta):<5}  {truth!s:>8}  {wo!s:>14}\n")
    out.write(f"expected total under a uniform prior: {expected}\n")
    for name in BUILTIN_NAMES:
        reports = enumerate_ex_post_equilibria(env, builtin(name))
        dominant = sum(r.dominant_strategy for r in reports)
        out.write(f"\n{render(builtin(name))}")
        out.write(f"ex-post equilibria: {len(reports)} ({dominant} in dominant strategies)\n")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mechlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("show-mechanism", help="render a mechanism's outcome table")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--name", choices=BUILTIN_NAMES, help="built-in mechanism")
    src.add_argument("--file", help="mechanism JSON file")
    p.set_defaults(func=cmd_show_mechanism)

    p = sub.add_parser("equilibria", help="list pure ex-post equilibria in the worker game")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--name", choices=BUILTIN_NAMES, help="built-in mechanism")
    src.add_argument("--file", help="mechanism JSON file (outcomes must be contract pairs)")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("verify-prop1", aliases=["verify-composition"],
                       help="check that equilibria compose on random small environments")
    p.add_argument("--trials", type=_positive, default=200, help="random instances after the fixed one (>= 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true", help="one line per trial")
    p.set_defaults(func=cmd_verify_composition)

    p = sub.add_parser("simulate", help="simulate sessions and write a CSV dataset")
    p.add_argument("--config", help="experiment JSON (default: the built-in preset)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", required=True, help="CSV path; metadata goes to OUT.meta.json")
    p.add_argument("--workers", type=_positive, default=1, help="worker processes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="regressions, summary rates, histogram and rank tests")
    p.add_argument("--data", required=True, help="CSV written by simulate")
    p.add_argument("--model", action="append", choices=("eq-wo", "eq-truth", "action", "profit"),
                   help="model family, repeatable (default: all)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--censoring", choices=("drop", "interval"), default="drop",
                   help="how (E,E)/(E,E) groups enter the equilibrium models")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="theory summary for the built-in environment")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (ParseError, ConfigError, SchemaError, DomainError, SizeError, Failure, ValueError) as exc:
        print(f"mechlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"mechlab {args.command}: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_FAIL


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
