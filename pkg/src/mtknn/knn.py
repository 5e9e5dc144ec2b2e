"""k-nearest-neighbours classifier with instrumented fault sites.

Each of the ten :class:`FaultSite` s is a branch point on the prediction path.
A classifier built without a mutant executes the pristine expression at every
site; a classifier bound to a mutant id swaps in that mutant's expression at
its one site. Every site keeps a hit counter so reachability can be measured.

Neighbour ordering works on squared distances; the square root is applied
only to the distances reported in a :class:`NeighborList`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .dataset import Dataset, QuerySet
from .errors import ContractViolation


class FaultSite(str, Enum):
    DIST_DIFF = "DIST_DIFF"
    DIST_SQUARE = "DIST_SQUARE"
    DIST_ACCUM = "DIST_ACCUM"
    DIST_SQRT = "DIST_SQRT"
    NN_COMPARE = "NN_COMPARE"
    NN_TIEBREAK = "NN_TIEBREAK"
    K_VALUE = "K_VALUE"
    VOTE_INCREMENT = "VOTE_INCREMENT"
    VOTE_ARGMAX = "VOTE_ARGMAX"
    LOOP_BOUND = "LOOP_BOUND"


@dataclass(frozen=True)
class Neighbor:
    index: int
    distance: float


@dataclass(frozen=True)
class Prediction:
    label: int
    votes: tuple[int, ...]


# Per-site expression tables. Key None is the pristine expression; every other
# key is the id of the mutant that replaces it.

def _omit_query(x, q):
    return x


def _omit_sample(x, q):
    return np.broadcast_to(-q, x.shape)


_DIFF = {
    None: lambda x, q: x - q,
    "M-DIST-DIFF-AOR-PLUS": lambda x, q: x + q,
    "M-DIST-DIFF-AOR-MUL": lambda x, q: x * q,
    "M-DIST-DIFF-SOD-QUERY": _omit_query,
    "M-DIST-DIFF-SOD-SAMPLE": _omit_sample,
    "M-DIST-DIFF-CONST-P1": lambda x, q: x - q + 1,
    "M-DIST-DIFF-CONST-M1": lambda x, q: x - q - 1,
    "M-DIST-DIFF-CONST-Q2": lambda x, q: x - 2 * q,
}

_SQUARE = {
    None: lambda d: d * d,
    "M-DIST-SQ-AOR-PLUS": lambda d: d + d,
    "M-DIST-SQ-AOR-MINUS": lambda d: d - d,
    "M-DIST-SQ-SOD": lambda d: d,
    "M-DIST-SQ-CONST-EXP3": lambda d: d * d * d,
}

_ACCUM = {
    None: lambda acc, t: acc + t,
    "M-DIST-ACC-AOR-MINUS": lambda acc, t: acc - t,
    "M-DIST-ACC-AOR-MUL": lambda acc, t: acc * t,
    "M-DIST-ACC-SOD": lambda acc, t: t,
}

_SQRT = {
    None: np.sqrt,
    "M-DIST-SQRT-SOD": lambda acc: acc,
}

# Replace the current worst kept neighbour with candidate distance d?
_COMPARE = {
    None: lambda d, worst: d < worst,
    "M-NN-CMP-ROR-LE": lambda d, worst: d <= worst,
    "M-NN-CMP-ROR-GT": lambda d, worst: d > worst,
    "M-NN-CMP-ROR-NE": lambda d, worst: d != worst,
    "M-NN-CMP-CONST-P1": lambda d, worst: d + 1 < worst,
    "M-NN-CMP-SOD": lambda d, worst: False,
}

# Move the newest kept neighbour (distance b) ahead of its predecessor (distance a)?
# Strict '>' keeps equal distances in training order.
_TIEBREAK = {
    None: lambda a, b: a > b,
    "M-NN-TIE-ROR-GE": lambda a, b: a >= b,
    "M-NN-TIE-ROR-LT": lambda a, b: a < b,
    "M-NN-TIE-ROR-NE": lambda a, b: a != b,
    "M-NN-TIE-SOD": None,
}

_K_VALUE = {
    None: lambda k: k,
    "M-K-CONST-P1": lambda k: k + 1,
    "M-K-CONST-P2": lambda k: k + 2,
    "M-K-CONST-ONE": lambda k: 1,
    "M-K-AOR-MUL2": lambda k: k * 2,
    "M-K-AOR-SQ": lambda k: k * k,
}


def _inc(votes, c):
    votes[c] += 1


def _dec(votes, c):
    votes[c] -= 1


def _skip(votes, c):
    pass


def _inc_next(votes, c):
    votes[(c + 1) % len(votes)] += 1


def _set_one(votes, c):
    votes[c] = 1


_INCREMENT = {
    None: _inc,
    "M-VOTE-INC-AOR-MINUS": _dec,
    "M-VOTE-INC-SOD": _skip,
    "M-VOTE-INC-CONST-IDX-P1": _inc_next,
    "M-VOTE-INC-CONST-ASSIGN1": _set_one,
}

# Does label with count a displace the current best with count b? Labels are
# scanned in ascending index order, so strict '>' favours the lowest index.
_ARGMAX = {
    None: lambda a, b: a > b,
    "M-VOTE-ARGMAX-HIGH": lambda a, b: a >= b,
    "M-VOTE-ARGMAX-ROR-LT": lambda a, b: a < b,
    "M-VOTE-ARGMAX-ROR-LE": lambda a, b: a <= b,
    "M-VOTE-ARGMAX-ROR-NE": lambda a, b: a != b,
    "M-VOTE-ARGMAX-CONST-P1": lambda a, b: a > b + 1,
    "M-VOTE-ARGMAX-SOD": lambda a, b: False,
}

# Keep counting votes at neighbour rank r (only evaluated for r >= 1)?
_LOOP = {
    None: lambda r, k: r < k,
    "M-LOOP-BOUND-CONST-M1": lambda r, k: r < k - 1,
    "M-LOOP-BOUND-SOD": lambda r, k: False,
}

_TABLES = {
    FaultSite.DIST_DIFF: _DIFF,
    FaultSite.DIST_SQUARE: _SQUARE,
    FaultSite.DIST_ACCUM: _ACCUM,
    FaultSite.DIST_SQRT: _SQRT,
    FaultSite.NN_COMPARE: _COMPARE,
    FaultSite.NN_TIEBREAK: _TIEBREAK,
    FaultSite.K_VALUE: _K_VALUE,
    FaultSite.VOTE_INCREMENT: _INCREMENT,
    FaultSite.VOTE_ARGMAX: _ARGMAX,
    FaultSite.LOOP_BOUND: _LOOP,
}

SITE_VARIANTS: dict[FaultSite, frozenset[str]] = {
    site: frozenset(k for k in table if k is not None) for site, table in _TABLES.items()
}


def pristine_expression(site: FaultSite):
    return _TABLES[site][None]


def _snapshot(x):
    if isinstance(x, np.ndarray):
        return x.copy()
    if isinstance(x, list):
        return list(x)
    return x


def site_of(mutant_id: str) -> FaultSite:
    for site, ids in SITE_VARIANTS.items():
        if mutant_id in ids:
            return site
    raise KeyError(f"unknown mutant id {mutant_id!r}")


class KnnClassifier:
    """Majority-vote kNN over Euclidean distance.

    Ties in distance go to the lower training index; ties in the vote go to
    the lower label index. An instance carries at most one active mutant and
    its own hit counters, so separate instances may run concurrently.
    """

    def __init__(self, mutant_id: str | None = None, trace: bool = False):
        self.mutant_id = mutant_id
        self.site = None if mutant_id is None else site_of(mutant_id)
        self.hits: Counter[FaultSite] = Counter()
        # (site, args before, args after, result) per site evaluation when tracing
        self.trace: list[tuple] | None = [] if trace else None
        fn = {site: table[mutant_id if site is self.site else None]
              for site, table in _TABLES.items()}
        if trace:
            fn = {site: f if f is None else self._traced(site, f) for site, f in fn.items()}
        self._diff = fn[FaultSite.DIST_DIFF]
        self._square = fn[FaultSite.DIST_SQUARE]
        self._accum = fn[FaultSite.DIST_ACCUM]
        self._sqrt = fn[FaultSite.DIST_SQRT]
        self._compare = fn[FaultSite.NN_COMPARE]
        self._tiebreak = fn[FaultSite.NN_TIEBREAK]
        self._k_value = fn[FaultSite.K_VALUE]
        self._increment = fn[FaultSite.VOTE_INCREMENT]
        self._argmax = fn[FaultSite.VOTE_ARGMAX]
        self._loop = fn[FaultSite.LOOP_BOUND]

    def __repr__(self):
        return f"KnnClassifier(mutant_id={self.mutant_id!r})"

    def reset_hits(self) -> None:
        self.hits.clear()

    def _traced(self, site: FaultSite, f):
        def run(*args):
            before = [_snapshot(a) for a in args]
            out = f(*args)
            self.trace.append((site, before, [_snapshot(a) for a in args], _snapshot(out)))
            return out
        return run

    # -- distance --------------------------------------------------------------

    def squared_distances(self, train_values: np.ndarray, query) -> np.ndarray:
        """Squared Euclidean distance from ``query`` to every training row."""
        x = np.asarray(train_values, dtype=np.float64)
        q = np.asarray(query, dtype=np.float64)
        hits = self.hits
        hits[FaultSite.DIST_DIFF] += 1
        diff = self._diff(x, q)
        hits[FaultSite.DIST_SQUARE] += 1
        terms = self._square(diff)
        hits[FaultSite.DIST_ACCUM] += 1
        # sorted per row so the total does not depend on attribute order
        terms = np.sort(terms, axis=1)
        acc = np.zeros(x.shape[0])
        for j in range(terms.shape[1]):
            acc = self._accum(acc, terms[:, j])
        return acc

    def _root(self, squared):
        self.hits[FaultSite.DIST_SQRT] += 1
        with np.errstate(invalid="ignore"):
            return self._sqrt(np.asarray(squared, dtype=np.float64))

    def distance(self, a: Sequence[float], b: Sequence[float]) -> float:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape or a.ndim != 1:
            raise ContractViolation(f"length mismatch: {a.shape} vs {b.shape}")
        return float(self._root(self.squared_distances(a[None, :], b))[0])

    # -- neighbour search ------------------------------------------------------

    def _select(self, dist: list[float], k: int) -> list[tuple[float, int]]:
        compare, tiebreak = self._compare, self._tiebreak
        best: list[tuple[float, int]] = []
        n_compare = n_tie = 0
        for i, d in enumerate(dist):
            if len(best) < k:
                best.append((d, i))
            else:
                n_compare += 1
                if not compare(d, best[-1][0]):
                    continue
                best[-1] = (d, i)
            p = len(best) - 1
            if p == 0:
                continue
            n_tie += 1
            if tiebreak is None:
                continue
            while p > 0 and tiebreak(best[p - 1][0], best[p][0]):
                best[p - 1], best[p] = best[p], best[p - 1]
                p -= 1
        self.hits[FaultSite.NN_COMPARE] += n_compare
        self.hits[FaultSite.NN_TIEBREAK] += n_tie
        return best

    def _check(self, train: Dataset, query, k: int) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (train.schema.n_attributes,):
            raise ContractViolation(
                f"query has {q.size} values, schema has {train.schema.n_attributes} attributes")
        if not 1 <= k <= len(train):
            raise ContractViolation(f"k={k} outside [1, {len(train)}]")
        return q

    def _nearest(self, train: Dataset, q: np.ndarray, k: int) -> tuple[int, list[Neighbor]]:
        self.hits[FaultSite.K_VALUE] += 1
        kk = self._k_value(k)
        best = self._select(self.squared_distances(train.values, q).tolist(), kk)
        roots = self._root([d for d, _ in best])
        return kk, [Neighbor(i, float(r)) for (_, i), r in zip(best, roots)]

    def k_nearest(self, train: Dataset, query, k: int) -> list[Neighbor]:
        """The k training samples nearest to ``query``, closest first."""
        return self._nearest(train, self._check(train, query, k), k)[1]

    # -- voting ----------------------------------------------------------------

    def _vote(self, labels: np.ndarray, neighbors: list[Neighbor], n_labels: int, kk: int) -> Prediction:
        votes = [0] * n_labels
        for r, nb in enumerate(neighbors):
            if r > 0:
                self.hits[FaultSite.LOOP_BOUND] += 1
                if not self._loop(r, kk):
                    break
            self.hits[FaultSite.VOTE_INCREMENT] += 1
            self._increment(votes, int(labels[nb.index]))
        self.hits[FaultSite.VOTE_ARGMAX] += 1
        best = 0
        for c in range(1, n_labels):
            if self._argmax(votes[c], votes[best]):
                best = c
        return Prediction(best, tuple(votes))

    def predict(self, train: Dataset, query, k: int) -> Prediction:
        kk, neighbors = self._nearest(train, self._check(train, query, k), k)
        return self._vote(train.labels, neighbors, train.schema.n_labels, kk)

    def predict_all(self, train: Dataset, queries: QuerySet, k: int) -> list[Prediction]:
        if queries.schema.n_attributes != train.schema.n_attributes:
            raise ContractViolation("query set and training set disagree on attributes")
        return [self.predict(train, q, k) for q in queries.values]


def euclidean_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Plain Euclidean distance between two equal-length value lists."""
    return KnnClassifier().distance(a, b)


def k_nearest(train: Dataset, query, k: int) -> list[Neighbor]:
    return KnnClassifier().k_nearest(train, query, k)


def predict(train: Dataset, query, k: int) -> Prediction:
    return KnnClassifier().predict(train, query, k)


def predict_all(train: Dataset, queries: QuerySet, k: int) -> list[Prediction]:
    return KnnClassifier().predict_all(train, queries, k)
