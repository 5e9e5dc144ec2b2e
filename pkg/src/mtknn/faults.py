"""Catalog of intra-method mutants seeded at the classifier's fault sites.

Family A holds the distance and neighbour-search sites, family B the k,
voting and loop sites. Mutants that would crash (k -> k-1 reaching zero,
division by a zero difference) or that are trivially equivalent (scaling
every distance or every vote by a constant) are left out, except
``M-DIST-SQRT-SOD`` which is kept as a flagged negative control.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .dataset import Dataset, QuerySet
from .knn import FaultSite, KnnClassifier


class Operator(str, Enum):
    AOR = "AOR"      # arithmetic operator replacement
    ROR = "ROR"      # relational operator replacement
    CONST = "CONST"  # constant perturbation
    SOD = "SOD"      # statement omission


@dataclass(frozen=True)
class FaultPoint:
    id: str
    site: FaultSite


FAULT_POINTS: tuple[FaultPoint, ...] = tuple(
    FaultPoint(f"FP-{site.value.replace('_', '-')}", site) for site in FaultSite)

_FAMILY_A = {FaultSite.DIST_DIFF, FaultSite.DIST_SQUARE, FaultSite.DIST_ACCUM,
             FaultSite.DIST_SQRT, FaultSite.NN_COMPARE, FaultSite.NN_TIEBREAK}


@dataclass(frozen=True)
class MutantSpec:
    id: str
    site: FaultSite
    operator: Operator
    parameter: str
    equivalent: bool = False

    @property
    def family(self) -> str:
        return "A" if self.site in _FAMILY_A else "B"

    @property
    def fault_point(self) -> FaultPoint:
        return next(fp for fp in FAULT_POINTS if fp.site is self.site)


def _m(id, site, op, param, equivalent=False):
    return MutantSpec(id, site, op, param, equivalent)


S, O = FaultSite, Operator

_CATALOG: tuple[MutantSpec, ...] = (
    _m("M-DIST-DIFF-AOR-PLUS", S.DIST_DIFF, O.AOR, "x - q -> x + q"),
    _m("M-DIST-DIFF-AOR-MUL", S.DIST_DIFF, O.AOR, "x - q -> x * q"),
    _m("M-DIST-DIFF-SOD-QUERY", S.DIST_DIFF, O.SOD, "x - q -> x"),
    _m("M-DIST-DIFF-SOD-SAMPLE", S.DIST_DIFF, O.SOD, "x - q -> -q"),
    _m("M-DIST-DIFF-CONST-P1", S.DIST_DIFF, O.CONST, "x - q -> x - q + 1"),
    _m("M-DIST-DIFF-CONST-M1", S.DIST_DIFF, O.CONST, "x - q -> x - q - 1"),
    _m("M-DIST-DIFF-CONST-Q2", S.DIST_DIFF, O.CONST, "x - q -> x - 2*q"),
    _m("M-DIST-SQ-AOR-PLUS", S.DIST_SQUARE, O.AOR, "d * d -> d + d"),
    _m("M-DIST-SQ-AOR-MINUS", S.DIST_SQUARE, O.AOR, "d * d -> d - d"),
    _m("M-DIST-SQ-SOD", S.DIST_SQUARE, O.SOD, "d * d -> d"),
    _m("M-DIST-SQ-CONST-EXP3", S.DIST_SQUARE, O.CONST, "d ** 2 -> d ** 3"),
    _m("M-DIST-ACC-AOR-MINUS", S.DIST_ACCUM, O.AOR, "acc + t -> acc - t"),
    _m("M-DIST-ACC-AOR-MUL", S.DIST_ACCUM, O.AOR, "acc + t -> acc * t"),
    _m("M-DIST-ACC-SOD", S.DIST_ACCUM, O.SOD, "acc = acc + t -> acc = t"),
    _m("M-DIST-SQRT-SOD", S.DIST_SQRT, O.SOD, "sqrt(acc) -> acc", equivalent=True),
    _m("M-NN-CMP-ROR-LE", S.NN_COMPARE, O.ROR, "< -> <="),
    _m("M-NN-CMP-ROR-GT", S.NN_COMPARE, O.ROR, "< -> >"),
    _m("M-NN-CMP-ROR-NE", S.NN_COMPARE, O.ROR, "< -> !="),
    _m("M-NN-CMP-CONST-P1", S.NN_COMPARE, O.CONST, "d < worst -> d + 1 < worst"),
    _m("M-NN-CMP-SOD", S.NN_COMPARE, O.SOD, "omit replacement of worst neighbour"),
    _m("M-NN-TIE-ROR-GE", S.NN_TIEBREAK, O.ROR, "> -> >="),
    _m("M-NN-TIE-ROR-LT", S.NN_TIEBREAK, O.ROR, "> -> <"),
    _m("M-NN-TIE-ROR-NE", S.NN_TIEBREAK, O.ROR, "> -> !="),
    _m("M-NN-TIE-SOD", S.NN_TIEBREAK, O.SOD, "omit reordering after insertion"),
    _m("M-K-CONST-P1", S.K_VALUE, O.CONST, "k -> k + 1"),
    _m("M-K-CONST-P2", S.K_VALUE, O.CONST, "k -> k + 2"),
    _m("M-K-CONST-ONE", S.K_VALUE, O.CONST, "k -> 1"),
    _m("M-K-AOR-MUL2", S.K_VALUE, O.AOR, "k -> k * 2"),
    _m("M-K-AOR-SQ", S.K_VALUE, O.AOR, "k -> k * k"),
    _m("M-VOTE-INC-AOR-MINUS", S.VOTE_INCREMENT, O.AOR, "votes[c] += 1 -> votes[c] -= 1"),
    _m("M-VOTE-INC-SOD", S.VOTE_INCREMENT, O.SOD, "omit votes[c] += 1"),
    _m("M-VOTE-INC-CONST-IDX-P1", S.VOTE_INCREMENT, O.CONST, "votes[c] -> votes[(c + 1) % n]"),
    _m("M-VOTE-INC-CONST-ASSIGN1", S.VOTE_INCREMENT, O.CONST, "votes[c] += 1 -> votes[c] = 1"),
    _m("M-VOTE-ARGMAX-HIGH", S.VOTE_ARGMAX, O.ROR, "> -> >= (ties to highest label)"),
    _m("M-VOTE-ARGMAX-ROR-LT", S.VOTE_ARGMAX, O.ROR, "> -> <"),
    _m("M-VOTE-ARGMAX-ROR-LE", S.VOTE_ARGMAX, O.ROR, "> -> <="),
    _m("M-VOTE-ARGMAX-ROR-NE", S.VOTE_ARGMAX, O.ROR, "> -> !="),
    _m("M-VOTE-ARGMAX-CONST-P1", S.VOTE_ARGMAX, O.CONST, "votes[c] > votes[best] -> votes[c] > votes[best] + 1"),
    _m("M-VOTE-ARGMAX-SOD", S.VOTE_ARGMAX, O.SOD, "omit best = c"),
    _m("M-LOOP-BOUND-CONST-M1", S.LOOP_BOUND, O.CONST, "r < k -> r < k - 1"),
    _m("M-LOOP-BOUND-SOD", S.LOOP_BOUND, O.SOD, "stop after the first neighbour"),
)

del S, O

_BY_ID = {m.id: m for m in _CATALOG}


def catalog() -> list[MutantSpec]:
    """All built-in mutants in stable order."""
    return list(_CATALOG)


def get_mutant(mutant_id: str) -> MutantSpec:
    try:
        return _BY_ID[mutant_id]
    except KeyError:
        raise KeyError(f"unknown mutant id {mutant_id!r}") from None


def default_selection() -> list[str]:
    return [m.id for m in _CATALOG if not m.equivalent]


@dataclass
class MutantHandle:
    spec: MutantSpec
    classifier: KnnClassifier = field(repr=False)

    @property
    def hits(self) -> int:
        return self.classifier.hits[self.spec.site]


def with_mutant(spec: MutantSpec | str) -> MutantHandle:
    """A fresh classifier whose fault site runs the mutated expression."""
    if isinstance(spec, str):
        spec = get_mutant(spec)
    elif _BY_ID.get(spec.id) != spec:
        raise KeyError(f"mutant {spec.id!r} is not in the catalog")
    return MutantHandle(spec, KnnClassifier(spec.id))


def reachable(handle: MutantHandle, train: Dataset, queries: QuerySet, k: int) -> bool:
    """Whether predicting ``queries`` executes the handle's mutated site."""
    handle.classifier.reset_hits()
    handle.classifier.predict_all(train, queries, k)
    return handle.hits > 0


def format_catalog(mutants: list[MutantSpec] | None = None) -> str:
    lines = []
    for m in mutants if mutants is not None else _CATALOG:
        lines.append("\t".join([m.id, m.site.value, m.operator.value, m.parameter,
                                m.family, "equivalent" if m.equivalent else "-"]))
    return "\n".join(lines) + "\n"

