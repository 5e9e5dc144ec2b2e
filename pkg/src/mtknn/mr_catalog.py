"""The eleven metamorphic relations for kNN.

Each relation derives a follow-up (training set, query set) from a source
case and the classifier's own predictions on it, and names the queries whose
follow-up predictions it constrains. MR1-MR6 are checked with k=3, MR7-MR11
with k=1; under those k values and the classifier's tie rules every relation
is a necessary property of a correct implementation.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import AttributeSchema, Dataset, LabelAttribute, QuerySet, load, save
from .errors import CaseInapplicable, ContractViolation
from .knn import Prediction


class MrId(str, Enum):
    MR1 = "MR1"
    MR2 = "MR2"
    MR3 = "MR3"
    MR4 = "MR4"
    MR5 = "MR5"
    MR6 = "MR6"
    MR7 = "MR7"
    MR8 = "MR8"
    MR9 = "MR9"
    MR10 = "MR10"
    MR11 = "MR11"

    @classmethod
    def parse(cls, text: str) -> MrId:
        text = text.strip().upper()
        if not text.startswith("MR"):
            text = "MR" + text
        return cls(text)


TITLES = {
    MrId.MR1: "affine map on an attribute subset",
    MrId.MR2: "attribute column permutation",
    MrId.MR3: "constant extra attribute",
    MrId.MR4: "predicted query added to training",
    MrId.MR5: "focal-class samples duplicated",
    MrId.MR6: "non-focal classes relabeled to fresh labels",
    MrId.MR7: "class label permutation",
    MrId.MR8: "focal-class indicator attribute",
    MrId.MR9: "non-focal samples duplicated under fresh labels",
    MrId.MR10: "focal class removed",
    MrId.MR11: "non-focal samples removed",
}

_K3 = {MrId.MR1, MrId.MR2, MrId.MR3, MrId.MR4, MrId.MR5, MrId.MR6}
FOCAL_MRS = frozenset({MrId.MR5, MrId.MR6, MrId.MR8, MrId.MR9, MrId.MR10, MrId.MR11})

# Affine parameters: |scale| in [1, 5], offset in [-50, 50].
SCALE_MAX = 5
OFFSET_RANGE = (-50, 50)
# Uninformative column constant range and the two levels of the informative column.
CONSTANT_RANGE = (0, 100)
INFORMATIVE_LEVELS = (0.0, 100.0)


def required_k(mr: MrId) -> int:
    return 3 if MrId(mr) in _K3 else 1


class Verdict(str, Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"


@dataclass(frozen=True)
class Witness:
    query_index: int
    source_label: int
    follow_label: int
    expected_label: int


@dataclass(frozen=True)
class MrVerdict:
    verdict: Verdict
    witness: Witness | None = None

    @property
    def satisfied(self) -> bool:
        return self.verdict is Verdict.SATISFIED


@dataclass(frozen=True, eq=False)
class MetamorphicCase:
    mr: MrId
    source_train: Dataset
    source_queries: QuerySet
    follow_train: Dataset
    follow_queries: QuerySet
    checked: tuple[int, ...]
    focal_class: int | None = None
    label_map: dict[int, int] | None = None
    params: dict = field(default_factory=dict)

    def expected_label(self, source_label: int) -> int:
        if self.mr is MrId.MR7:
            return self.label_map[source_label]
        return source_label

    def metadata(self) -> dict:
        return {
            "mrId": self.mr.value,
            "focalClass": self.focal_class,
            "labelMap": None if self.label_map is None
            else {str(k): v for k, v in sorted(self.label_map.items())},
            "checkedQueryIndices": list(self.checked),
            "transformParams": self.params,
        }

    def __eq__(self, other):
        if not isinstance(other, MetamorphicCase):
            return NotImplemented
        return (self.metadata() == other.metadata()
                and self.source_train == other.source_train
                and self.source_queries == other.source_queries
                and self.follow_train == other.follow_train
                and self.follow_queries == other.follow_queries)

    __hash__ = None


def _labels(predictions: Sequence[Prediction | int]) -> list[int]:
    return [p.label if isinstance(p, Prediction) else int(p) for p in predictions]


def _rng_nonidentity_permutation(rng: np.random.Generator, n: int) -> list[int]:
    perm = rng.permutation(n)
    while n > 1 and np.array_equal(perm, np.arange(n)):
        perm = rng.permutation(n)
    return [int(p) for p in perm]


def draw_transform_params(mr: MrId, n_attributes: int, n_labels: int, seed: int) -> dict:
    """Random parameters for MR1, MR2, MR3 and MR7; empty for the others.

    Depends only on the relation, the schema shape and the seed. MR1 scales
    by |k| > 1 only when the subset covers every attribute: scaling a proper
    subset re-weights attributes and can reorder neighbours, so a proper
    subset is only reflected (k = -1) or translated (k = 1).
    """
    mr = MrId(mr)
    rng = np.random.default_rng(seed)
    if mr is MrId.MR1:
        size = int(rng.integers(1, n_attributes + 1))
        subset = sorted(int(j) for j in rng.choice(n_attributes, size=size, replace=False))
        magnitude = int(rng.integers(1, SCALE_MAX + 1))
        sign = int(rng.choice([-1, 1]))
        offset = int(rng.integers(OFFSET_RANGE[0], OFFSET_RANGE[1] + 1))
        scale = sign * (magnitude if size == n_attributes else 1)
        return {"attributes": subset, "scale": scale, "offset": offset}
    if mr is MrId.MR2:
        return {"permutation": _rng_nonidentity_permutation(rng, n_attributes)}
    if mr is MrId.MR3:
        return {"value": int(rng.integers(CONSTANT_RANGE[0], CONSTANT_RANGE[1] + 1))}
    if mr is MrId.MR7:
        return {"permutation": _rng_nonidentity_permutation(rng, n_labels)}
    return {}


def focal_candidates(predicted: Sequence[int]) -> list[int]:
    """Predicted labels, most frequent first, ties to the lower index."""
    counts = Counter(predicted)
    return sorted(counts, key=lambda c: (-counts[c], c))


def _fresh_labels(label: LabelAttribute, exclude: int) -> tuple[LabelAttribute, dict[int, int]]:
    domain = list(label.domain)
    mapping = {}
    for x, name in enumerate(label.domain):
        if x == exclude:
            continue
        fresh = name + "*"
        while fresh in domain:
            fresh += "*"
        mapping[x] = len(domain)
        domain.append(fresh)
    return LabelAttribute(label.name, tuple(domain)), mapping


def _with_label_domain(schema: AttributeSchema, label: LabelAttribute) -> AttributeSchema:
    return AttributeSchema(schema.attributes, label)


def derive_follow_up(mr: MrId, train: Dataset, queries: QuerySet,
                     source_predictions: Sequence[Prediction | int], seed: int,
                     params: dict | None = None) -> MetamorphicCase:
    """Build the follow-up case for ``mr``.

    ``source_predictions`` must come from the classifier under test run with
    ``required_k(mr)``. ``params`` overrides the seeded parameter draw of the
    randomised relations (MR1, MR2, MR3, MR7). Raises :class:`CaseInapplicable` when the relation has
    nothing to anchor on (no predictions, or MR10 would empty the training set).
    """
    mr = MrId(mr)
    predicted = _labels(source_predictions)
    if len(predicted) != len(queries):
        raise ContractViolation(f"{len(predicted)} predictions for {len(queries)} queries")
    schema = train.schema
    m, n = schema.n_attributes, schema.n_labels
    X, y, Q = train.values, train.labels, queries.values
    everything = tuple(range(len(queries)))
    params = dict(params) if params is not None else draw_transform_params(mr, m, n, seed)
    if mr is MrId.MR1 and params["scale"] == 0:
        raise ContractViolation("affine scale must be non-zero")
    case = dict(mr=mr, source_train=train, source_queries=queries, params=params)

    if mr in FOCAL_MRS or mr is MrId.MR4:
        if not predicted:
            raise CaseInapplicable(f"{mr.value} needs at least one prediction")

    if mr is MrId.MR1:
        cols = params["attributes"]
        k, b = params["scale"], params["offset"]
        X2, Q2 = X.copy(), Q.copy()
        X2[:, cols] = k * X2[:, cols] + b
        Q2[:, cols] = k * Q2[:, cols] + b
        return MetamorphicCase(follow_train=Dataset(schema, X2, y),
                               follow_queries=QuerySet(schema, Q2), checked=everything, **case)

    if mr is MrId.MR2:
        perm = params["permutation"]
        s2 = AttributeSchema(tuple(schema.attributes[j] for j in perm), schema.label)
        return MetamorphicCase(follow_train=Dataset(s2, X[:, perm], y),
                               follow_queries=QuerySet(s2, Q[:, perm]), checked=everything, **case)

    if mr is MrId.MR3:
        name = schema.fresh_attribute_name("uninformative")
        params["name"] = name
        c = float(params["value"])
        s2 = AttributeSchema((*schema.attributes, name), schema.label)
        X2 = np.column_stack([X, np.full(len(X), c)])
        Q2 = np.column_stack([Q, np.full(len(Q), c)])
        return MetamorphicCase(follow_train=Dataset(s2, X2, y),
                               follow_queries=QuerySet(s2, Q2), checked=everything, **case)

    if mr is MrId.MR4:
        t = 0
        params["query"] = t
        X2 = np.vstack([X, Q[t:t + 1]])
        y2 = np.append(y, predicted[t])
        return MetamorphicCase(follow_train=Dataset(schema, X2, y2), follow_queries=queries,
                               checked=(t,), **case)

    if mr is MrId.MR7:
        perm = params["permutation"]
        label_map = {c: perm[c] for c in range(n)}
        y2 = np.array([perm[c] for c in y.tolist()], dtype=np.int64)
        return MetamorphicCase(follow_train=Dataset(schema, X, y2), follow_queries=queries,
                               checked=everything, label_map=label_map, **case)

    # Focal-class relations.
    candidates = focal_candidates(predicted)
    if mr is MrId.MR10:
        candidates = [c for c in candidates if np.any(y != c)]
        if not candidates:
            raise CaseInapplicable("MR10 would remove every training sample")
    focal = candidates[0]
    on_focal = tuple(i for i, c in enumerate(predicted) if c == focal)
    case["focal_class"] = focal

    if mr is MrId.MR5:
        keep = y == focal
        X2 = np.vstack([X, X[keep]])
        y2 = np.concatenate([y, y[keep]])
        return MetamorphicCase(follow_train=Dataset(schema, X2, y2), follow_queries=queries,
                               checked=on_focal, **case)

    if mr is MrId.MR6:
        label2, mapping = _fresh_labels(schema.label, focal)
        s2 = _with_label_domain(schema, label2)
        y2 = np.array([mapping.get(c, c) for c in y.tolist()], dtype=np.int64)
        return MetamorphicCase(follow_train=Dataset(s2, X, y2), follow_queries=QuerySet(s2, Q),
                               checked=on_focal, label_map=mapping, **case)

    if mr is MrId.MR8:
        name = schema.fresh_attribute_name("informative")
        on, off = INFORMATIVE_LEVELS
        params.update(name=name, focal_value=on, other_value=off)
        s2 = AttributeSchema((*schema.attributes, name), schema.label)
        train_col = np.where(y == focal, on, off)
        query_col = np.where(np.array(predicted) == focal, on, off)
        X2 = np.column_stack([X, train_col])
        Q2 = np.column_stack([Q, query_col])
        return MetamorphicCase(follow_train=Dataset(s2, X2, y),
                               follow_queries=QuerySet(s2, Q2), checked=on_focal, **case)

    if mr is MrId.MR9:
        label2, mapping = _fresh_labels(schema.label, focal)
        s2 = _with_label_domain(schema, label2)
        dup = y != focal
        X2 = np.vstack([X, X[dup]])
        y2 = np.concatenate([y, [mapping[c] for c in y[dup].tolist()]]).astype(np.int64)
        return MetamorphicCase(follow_train=Dataset(s2, X2, y2), follow_queries=QuerySet(s2, Q),
                               checked=on_focal, label_map=mapping, **case)

    if mr is MrId.MR10:
        keep = y != focal
        others = tuple(i for i, c in enumerate(predicted) if c != focal)
        return MetamorphicCase(follow_train=Dataset(schema, X[keep], y[keep]),
                               follow_queries=queries, checked=others, **case)

    if mr is MrId.MR11:
        keep = y == focal
        if not keep.any():
            raise CaseInapplicable("MR11 would remove every training sample")
        return MetamorphicCase(follow_train=Dataset(schema, X[keep], y[keep]),
                               follow_queries=queries, checked=on_focal, **case)

    raise AssertionError(mr)


def check_relation(case: MetamorphicCase, source_predictions: Sequence[Prediction | int],
                   follow_predictions: Sequence[Prediction | int]) -> MrVerdict:
    """Compare follow-up predictions with what the relation expects.

    Only ``case.checked`` queries are constrained; the first failing one is
    returned as the witness.
    """
    src = _labels(source_predictions)
    fol = _labels(follow_predictions)
    if len(src) != len(case.source_queries) or len(fol) != len(case.follow_queries):
        raise ContractViolation(
            f"expected {len(case.source_queries)}/{len(case.follow_queries)} predictions, "
            f"got {len(src)}/{len(fol)}")
    for i in case.checked:
        expected = case.expected_label(src[i])
        if fol[i] != expected:
            return MrVerdict(Verdict.VIOLATED, Witness(i, src[i], fol[i], expected))
    return MrVerdict(Verdict.SATISFIED)


# --- case directories ---------------------------------------------------------

_FILES = ("source_train.arff", "source_queries.arff", "follow_train.arff", "follow_queries.arff")


def save_case(case: MetamorphicCase, directory: str | Path) -> Path:
    """Write the four data files plus ``meta.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    parts = (case.source_train, case.source_queries, case.follow_train, case.follow_queries)
    for name, data in zip(_FILES, parts):
        save(data, directory / name)
    (directory / "meta.json").write_text(json.dumps(case.metadata(), indent=2, sort_keys=True) + "\n")
    return directory


def load_case(directory: str | Path) -> MetamorphicCase:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    st, sq, ft, fq = (load(directory / name, kind=kind) for name, kind in
                      zip(_FILES, ("dataset", "queries", "dataset", "queries")))
    label_map = meta["labelMap"]
    if label_map is not None:
        label_map = {int(k): int(v) for k, v in label_map.items()}
    return MetamorphicCase(
        mr=MrId(meta["mrId"]), source_train=st, source_queries=sq, follow_train=ft,
        follow_queries=fq, checked=tuple(meta["checkedQueryIndices"]),
        focal_class=meta["focalClass"], label_map=label_map, params=meta["transformParams"])
