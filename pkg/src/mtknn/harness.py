"""Experiment orchestration: kill matrices, kill-rate reports, soundness runs.

Every random draw is keyed by a seed derived from the experiment seed and the
draw's role (see :func:`derive_seed`), so results do not depend on execution
order or on how cells are spread across worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import faults
from .dataset import Dataset, GeneratorConfig, QuerySet, generate_random_case
from .errors import CaseInapplicable, ConfigError
from .faults import MutantSpec
from .knn import KnnClassifier
from .mr_catalog import TITLES, MrId, Witness, check_relation, derive_follow_up, required_k

log = logging.getLogger(__name__)

MAX_RETRIES = 3
PRISTINE = "pristine"


def derive_seed(*parts) -> int:
    """64-bit seed from a tuple of labels (BLAKE2b of their string forms)."""
    text = "\x1f".join(p.value if isinstance(p, Enum) else str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    mrs: tuple[MrId, ...] = tuple(MrId)
    mutants: tuple[str, ...] = field(default_factory=lambda: tuple(faults.default_selection()))
    cases: int = 10
    generator: GeneratorConfig = GeneratorConfig()
    size_sweep: tuple[int, ...] | None = None
    subset_sizes: tuple[int, ...] | None = None
    families: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mrs", tuple(MrId(m) for m in self.mrs))
        object.__setattr__(self, "mutants", tuple(self.mutants))
        if not self.mrs:
            raise ConfigError("no metamorphic relations selected")
        if not self.mutants:
            raise ConfigError("no mutants selected")
        if len(set(self.mutants)) != len(self.mutants) or len(set(self.mrs)) != len(self.mrs):
            raise ConfigError("duplicate entries in the selection")
        for mid in self.mutants:
            try:
                faults.get_mutant(mid)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
        if self.cases < 0:
            raise ConfigError("cases must be non-negative")
        for name in ("size_sweep", "subset_sizes"):
            values = getattr(self, name)
            if values is None:
                continue
            values = tuple(int(v) for v in values)
            object.__setattr__(self, name, values)
            if not values or any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"{name} must be a non-empty strictly increasing list")
            if values[0] < 1:
                raise ConfigError(f"{name} entries must be positive")
        if self.subset_sizes and self.subset_sizes[-1] > len(self.mutants):
            raise ConfigError(
                f"subset size {self.subset_sizes[-1]} exceeds the {len(self.mutants)} selected mutants")

    def subset_order(self) -> list[str]:
        """Seeded shuffle of the mutant selection; subsets are its prefixes."""
        rng = np.random.default_rng(derive_seed(self.seed, "subsets"))
        return [self.mutants[i] for i in rng.permutation(len(self.mutants))]

    def points(self) -> list[tuple[str, GeneratorConfig]]:
        if self.size_sweep is None:
            return [("all", self.generator)]
        return [(f"size={s}", replace(self.generator, train_size_range=(s, s)))
                for s in self.size_sweep]

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "mrs": [m.value for m in self.mrs],
            "mutants": list(self.mutants),
            "cases": self.cases,
            "generator": self.generator.to_dict(),
            "size_sweep": None if self.size_sweep is None else list(self.size_sweep),
            "subset_sizes": None if self.subset_sizes is None else list(self.subset_sizes),
            "families": self.families,
        }
        if self.subset_sizes:
            d["subset_order"] = self.subset_order()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        gen = dict(d.get("generator", {}))
        return cls(
            seed=d.get("seed", 0),
            mrs=tuple(d.get("mrs", [m.value for m in MrId])),
            mutants=tuple(d.get("mutants", faults.default_selection())),
            cases=d.get("cases", 10),
            generator=GeneratorConfig(**gen),
            size_sweep=d.get("size_sweep"),
            subset_sizes=d.get("subset_sizes"),
            families=d.get("families", False),
        )


class CellStatus(str, Enum):
    KILLED = "killed"
    SURVIVED = "survived"
    UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class CellVerdict:
    status: CellStatus
    case_index: int | None = None
    witness: Witness | None = None


def source_cases(generator: GeneratorConfig, seed: int, mr: MrId, count: int) -> list[tuple[Dataset, QuerySet]]:
    """The source cases shared by every mutant for one relation."""
    return [generate_random_case(generator.with_seed(derive_seed(seed, "source", mr, i)))
            for i in range(count)]


def _mutant_key(mutant: MutantSpec | str | None) -> str | None:
    if mutant is None:
        return None
    return mutant.id if isinstance(mutant, MutantSpec) else faults.get_mutant(mutant).id


def evaluate_cell(mutant: MutantSpec | str | None, mr: MrId,
                  sources: Sequence[tuple[Dataset, QuerySet]], seed: int,
                  generator: GeneratorConfig | None = None,
                  check: Callable = check_relation) -> CellVerdict:
    """Run every source case of one (mutant, relation) cell.

    ``mutant=None`` runs the pristine classifier. Source and follow-up
    predictions both come from the classifier under test. The cell is killed
    on the first violated case, unreachable if no case executed the mutated
    site, and survived otherwise.
    """
    mr = MrId(mr)
    mid = _mutant_key(mutant)
    clf = KnnClassifier(mid)
    k = required_k(mr)
    generator = generator or GeneratorConfig()
    reached = mid is None
    for ci, source in enumerate(sources):
        case_seed = derive_seed(seed, mid or PRISTINE, mr, ci)
        train, queries = source
        for attempt in range(MAX_RETRIES + 1):
            clf.reset_hits()
            src = clf.predict_all(train, queries, k)
            try:
                case = derive_follow_up(mr, train, queries, src, case_seed)
            except CaseInapplicable as exc:
                reached = reached or clf.hits[clf.site] > 0
                if attempt == MAX_RETRIES:
                    log.warning("skipping case %d of %s/%s: %s", ci, mid, mr.value, exc)
                    break
                train, queries = generate_random_case(generator.with_seed(
                    derive_seed(seed, "replacement", mid or PRISTINE, mr, ci, attempt)))
                continue
            fol = clf.predict_all(case.follow_train, case.follow_queries, k)
            reached = reached or clf.hits[clf.site] > 0
            verdict = check(case, src, fol)
            if not verdict.satisfied:
                return CellVerdict(CellStatus.KILLED, ci, verdict.witness)
            break
    return CellVerdict(CellStatus.SURVIVED if reached else CellStatus.UNREACHABLE)


@dataclass
class KillMatrix:
    point: str
    mutants: tuple[str, ...]
    mrs: tuple[MrId, ...]
    cells: dict[tuple[str, MrId], CellVerdict]
    seed: int = 0

    def __getitem__(self, key: tuple[str, MrId]) -> CellVerdict:
        mid, mr = key
        return self.cells[mid, MrId(mr)]

    def killed_mutants(self) -> set[str]:
        return {mid for (mid, _), v in self.cells.items() if v.status is CellStatus.KILLED}

    def rows(self) -> list[dict]:
        out = []
        for mid in self.mutants:
            for mr in self.mrs:
                v = self.cells[mid, mr]
                out.append({
                    "point": self.point,
                    "mutant_id": mid,
                    "mr": mr.value,
                    "verdict": v.status.value,
                    "witness_case": "" if v.case_index is None else v.case_index,
                    "witness_query": "" if v.witness is None else v.witness.query_index,
                })
        return out


def _evaluate_group(args) -> list[tuple[str, str, CellVerdict]]:
    seed, mr, mutants, cases, generator = args
    sources = source_cases(generator, seed, mr, cases)
    return [(mid, mr, evaluate_cell(mid, mr, sources, seed, generator)) for mid in mutants]


def build_matrices(config: ExperimentConfig, jobs: int = 1) -> list[KillMatrix]:
    """Evaluate every (mutant, relation) cell at every sweep point."""
    tasks, owners = [], []
    for point, generator in config.points():
        for mr in config.mrs:
            tasks.append((config.seed, mr, config.mutants, config.cases, generator))
            owners.append(point)
    start = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_group, tasks))
    else:
        results = [_evaluate_group(t) for t in tasks]
    cells: dict[str, dict] = {point: {} for point, _ in config.points()}
    for point, group in zip(owners, results):
        for mid, mr, verdict in group:
            cells[point][mid, mr] = verdict
    log.info("evaluated %d cells in %.2fs",
             sum(len(c) for c in cells.values()), time.perf_counter() - start)
    return [KillMatrix(point, config.mutants, config.mrs, cells[point], config.seed)
            for point, _ in config.points()]


# --- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class RateRow:
    grouping: str
    mr: str
    killed: int
    survived: int
    unreachable: int

    @property
    def rate(self) -> float | None:
        total = self.killed + self.survived
        return None if total == 0 else self.killed / total

    def as_dict(self) -> dict:
        rate = self.rate
        return {"grouping": self.grouping, "mr": self.mr, "killed": self.killed,
                "survived": self.survived, "unreachable": self.unreachable,
                "rate": "NA" if rate is None else f"{rate:.6f}"}


def _groupings(point: str, mutants: Sequence[str], config: dict) -> list[tuple[str, list[str]]]:
    def name(sub: str | None) -> str:
        parts = [p for p in (None if point == "all" else point, sub) if p]
        return ";".join(parts) or "all"

    groups = [(name(None), list(mutants))]
    if config.get("families"):
        for fam in ("A", "B"):
            groups.append((name(f"family={fam}"),
                           [m for m in mutants if faults.get_mutant(m).family == fam]))
    if config.get("subset_sizes"):
        order = config["subset_order"]
        for size in config["subset_sizes"]:
            groups.append((name(f"subset={size}"), order[:size]))
    return groups


def kill_rates(matrix_rows: Iterable[dict], config: dict) -> list[RateRow]:
    """Per-relation and overall kill counts for each grouping.

    A pure function of the matrix rows and the config echo. Equivalent-flagged
    mutants are left out of every count; unreachable cells are counted but
    kept out of the rate denominator.
    """
    by_point: dict[str, dict[tuple[str, str], str]] = {}
    for row in matrix_rows:
        by_point.setdefault(row["point"], {})[row["mutant_id"], row["mr"]] = row["verdict"]
    mrs = list(config["mrs"])
    out = []
    for point, cells in by_point.items():
        mutants = list(dict.fromkeys(mid for mid, _ in cells))
        for grouping, members in _groupings(point, mutants, config):
            members = [m for m in members if not faults.get_mutant(m).equivalent]
            for mr in mrs:
                counts = {s.value: 0 for s in CellStatus}
                for mid in members:
                    counts[cells[mid, mr]] += 1
                out.append(RateRow(grouping, mr, counts["killed"], counts["survived"],
                                   counts["unreachable"]))
            counts = {s.value: 0 for s in CellStatus}
            for mid in members:
                verdicts = {cells[mid, mr] for mr in mrs}
                if "killed" in verdicts:
                    counts["killed"] += 1
                elif "survived" in verdicts:
                    counts["survived"] += 1
                else:
                    counts["unreachable"] += 1
            out.append(RateRow(grouping, "ALL", counts["killed"], counts["survived"],
                               counts["unreachable"]))
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    matrices: list[KillMatrix]
    rates: list[RateRow]

    def matrix_rows(self) -> list[dict]:
        return [row for m in self.matrices for row in m.rows()]


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    matrices = build_matrices(config, jobs)
    rows = [row for m in matrices for row in m.rows()]
    rates = kill_rates(rows, config.to_dict())
    return ExperimentResult(config, matrices, rates)


MATRIX_FIELDS = ["point", "mutant_id", "mr", "verdict", "witness_case", "witness_query"]
RATE_FIELDS = ["grouping", "mr", "killed", "survived", "unreachable", "rate"]


def _csv_text(fields: list[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def write_results(result: ExperimentResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matrix.csv").write_text(_csv_text(MATRIX_FIELDS, result.matrix_rows()))
    (out / "rates.csv").write_text(_csv_text(RATE_FIELDS, [r.as_dict() for r in result.rates]))
    (out / "config.json").write_text(json.dumps(result.config.to_dict(), indent=2, sort_keys=True) + "\n")
    return out


def read_matrix(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def report_from_files(matrix_path: str | Path, config_path: str | Path | None = None) -> list[RateRow]:
    matrix_path = Path(matrix_path)
    config_path = Path(config_path) if config_path else matrix_path.with_name("config.json")
    rows = read_matrix(matrix_path)
    if config_path.exists():
        config = json.loads(config_path.read_text())
    else:
        config = {"mrs": list(dict.fromkeys(r["mr"] for r in rows))}
    return kill_rates(rows, config)


def format_rates(rates: Sequence[RateRow]) -> str:
    lines = [f"{'grouping':<24}{'mr':<6}{'killed':>8}{'survived':>10}{'unreach':>9}{'rate':>9}"]
    for r in rates:
        rate = "NA" if r.rate is None else f"{r.rate:.3f}"
        lines.append(f"{r.grouping:<24}{r.mr:<6}{r.killed:>8}{r.survived:>10}{r.unreachable:>9}{rate:>9}")
    return "\n".join(lines) + "\n"


# --- soundness ----------------------------------------------------------------

@dataclass
class SoundnessReport:
    cases_checked: dict[str, int]
    violations: list[tuple[str, int, Witness]]
    skipped: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"{mr:<5} {n:>5} cases  {TITLES[MrId(mr)]}" for mr, n in self.cases_checked.items()]
        lines.append(f"violations: {len(self.violations)}")
        for mr, ci, w in self.violations[:20]:
            lines.append(f"  {mr} case {ci} query {w.query_index}: "
                         f"source={w.source_label} follow={w.follow_label} expected={w.expected_label}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines) + "\n"


def soundness_suite(config: ExperimentConfig | None = None, check: Callable = check_relation) -> SoundnessReport:
    """Check every selected relation against the unmutated classifier."""
    config = config or ExperimentConfig()
    report = SoundnessReport({}, [])
    if config.cases == 0:
        msg = "no source cases requested; the check is vacuous"
        log.warning(msg)
        report.warnings.append(msg)
    clf = KnnClassifier()
    for mr in config.mrs:
        k = required_k(mr)
        checked = 0
        for ci, (train, queries) in enumerate(source_cases(config.generator, config.seed, mr, config.cases)):
            src = clf.predict_all(train, queries, k)
            try:
                case = derive_follow_up(mr, train, queries, src, derive_seed(config.seed, PRISTINE, mr, ci))
            except CaseInapplicable:
                report.skipped += 1
                continue
            fol = clf.predict_all(case.follow_train, case.follow_queries, k)
            verdict = check(case, src, fol)
            checked += 1
            if not verdict.satisfied:
                report.violations.append((mr.value, ci, verdict.witness))
        report.cases_checked[mr.value] = checked
    return report
