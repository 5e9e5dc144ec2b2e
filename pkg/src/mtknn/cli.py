"""Command-line entry point: ``mtknn {generate,faults,soundness,run,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import faults
from .dataset import GeneratorConfig
from .errors import CaseInapplicable, ConfigError
from .harness import (PRISTINE, ExperimentConfig, derive_seed, format_rates, report_from_files,
                      run_experiment, soundness_suite, source_cases, write_results)
from .knn import KnnClassifier
from .mr_catalog import MrId, derive_follow_up, required_k, save_case

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def _int_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def parse_sweep(text: str) -> list[int]:
    """``"30:200:10"`` (inclusive stop) or a comma list ``"30,40,50"``."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"bad sweep {text!r}; expected START:STOP:STEP")
        start, stop, step = parts
        return list(range(start, stop + 1, step))
    return [int(p) for p in text.split(",") if p.strip()]


def _mrs(text: str | None) -> tuple[MrId, ...]:
    if not text or text == "all":
        return tuple(MrId)
    try:
        return tuple(MrId.parse(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _mutants(text: str | None) -> tuple[str, ...]:
    if not text:
        return tuple(faults.default_selection())
    if text == "all":
        return tuple(m.id for m in faults.catalog())
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _generator(args) -> GeneratorConfig:
    return GeneratorConfig(
        attribute_count=args.attributes, label_count=args.labels,
        train_size_range=_int_range(args.train_size), query_count=args.queries)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mrs", help="comma list such as MR1,MR7 (default: all)")
    p.add_argument("--cases", type=int, default=10, help="source cases per relation")
    p.add_argument("--train-size", default="10:200", help="LO:HI training-set size range")
    p.add_argument("--queries", type=int, default=20, help="queries per source case")
    p.add_argument("--attributes", type=int, default=4)
    p.add_argument("--labels", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtknn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write metamorphic case directories")
    _add_common(p)
    p.set_defaults(cases=1)
    p.add_argument("--out", default="cases")

    p = sub.add_parser("faults", help="inspect the mutant catalog")
    p.add_argument("action", choices=["list"])

    p = sub.add_parser("soundness", help="check every relation on the unmutated classifier")
    _add_common(p)
    p.set_defaults(cases=100)

    p = sub.add_parser("run", help="build kill matrices and kill-rate tables")
    _add_common(p)
    p.add_argument("--mutants", help="comma list of mutant ids, or 'all' (default: non-equivalent)")
    p.add_argument("--size-sweep", help="training sizes, START:STOP:STEP or comma list")
    p.add_argument("--subset-sizes", help="nested mutant-subset sizes, comma list")
    p.add_argument("--families", action="store_true", help="report rates per mutant family")
    p.add_argument("--out", default="results")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("report", help="recompute kill-rate tables from a matrix.csv")
    p.add_argument("matrix")
    p.add_argument("--config", help="config.json echo (default: next to the matrix)")
    return parser


def _cmd_generate(args) -> int:
    generator = _generator(args)
    clf = KnnClassifier()
    out = Path(args.out)
    written = 0
    for mr in _mrs(args.mrs):
        k = required_k(mr)
        for ci, (train, queries) in enumerate(source_cases(generator, args.seed, mr, args.cases)):
            src = clf.predict_all(train, queries, k)
            try:
                case = derive_follow_up(mr, train, queries, src, derive_seed(args.seed, PRISTINE, mr, ci))
            except CaseInapplicable as exc:
                logging.warning("skipping %s case %d: %s", mr.value, ci, exc)
                continue
            save_case(case, out / mr.value / f"case_{ci:03d}")
            written += 1
    print(f"wrote {written} cases to {out}")
    return EXIT_OK


def _cmd_soundness(args) -> int:
    config = ExperimentConfig(seed=args.seed, mrs=_mrs(args.mrs), cases=args.cases,
                              generator=_generator(args))
    report = soundness_suite(config)
    sys.stdout.write(report.summary())
    return EXIT_OK if report.passed else EXIT_VIOLATION


def _cmd_run(args) -> int:
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    config = ExperimentConfig(
        seed=args.seed, mrs=_mrs(args.mrs), mutants=_mutants(args.mutants), cases=args.cases,
        generator=_generator(args),
        size_sweep=parse_sweep(args.size_sweep) if args.size_sweep else None,
        subset_sizes=parse_sweep(args.subset_sizes) if args.subset_sizes else None,
        families=args.families)
    result = run_experiment(config, jobs=args.jobs)
    out = write_results(result, args.out)
    sys.stdout.write(format_rates(result.rates))
    print(f"results in {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    sys.stdout.write(format_rates(report_from_files(args.matrix, args.config)))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "faults":
            sys.stdout.write(faults.format_catalog())
            return EXIT_OK
        handler = {"generate": _cmd_generate, "soundness": _cmd_soundness,
                   "run": _cmd_run, "report": _cmd_report}[args.command]
        return handler(args)
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
