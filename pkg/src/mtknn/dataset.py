"""Training/query data model, seeded case generation and ARFF/CSV I/O.

Attribute values are held as float64 arrays even though the generator only
draws integers; relation transforms such as affine maps must stay closed.
Random draws use numpy's PCG64 (``numpy.random.default_rng``), so a seed
fully determines a generated case on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ArffError, ConfigError, ContractViolation

# Attribute and label names used for the default 4-attribute / 5-label layout.
DEFAULT_ATTRIBUTE_NAMES = ("pictures", "paragraphs", "files", "files2")
DEFAULT_LABEL_NAME = "profit"


@dataclass(frozen=True)
class LabelAttribute:
    name: str
    domain: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))
        if not self.domain:
            raise ContractViolation("label domain must not be empty")
        if len(set(self.domain)) != len(self.domain):
            raise ContractViolation(f"duplicate label names in {self.domain}")

    def index(self, value: str) -> int:
        return self.domain.index(value)


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered numeric attributes plus an optional nominal label attribute.

    Label indices are positions in ``label.domain``. A schema without a label
    only arises when a label-less query file is read.
    """

    attributes: tuple[str, ...]
    label: LabelAttribute | None = None

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = list(self.attributes)
        if self.label is not None:
            names.append(self.label.name)
        if len(set(names)) != len(names):
            raise ContractViolation(f"attribute names must be unique: {names}")

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_labels(self) -> int:
        return 0 if self.label is None else len(self.label.domain)

    @classmethod
    def default(cls, n_attributes: int = 4, n_labels: int = 5) -> AttributeSchema:
        if n_attributes == len(DEFAULT_ATTRIBUTE_NAMES):
            names = DEFAULT_ATTRIBUTE_NAMES
        else:
            names = tuple(f"att{j}" for j in range(n_attributes))
        domain = tuple(str(i) for i in range(n_labels))
        return cls(names, LabelAttribute(DEFAULT_LABEL_NAME, domain))

    def fresh_attribute_name(self, stem: str) -> str:
        taken = set(self.attributes)
        if self.label is not None:
            taken.add(self.label.name)
        name, i = stem, 1
        while name in taken:
            name = f"{stem}_{i}"
            i += 1
        return name


class Sample(NamedTuple):
    values: tuple[float, ...]
    label: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled training data. Row order matters: it is the distance tie-break key."""

    schema: AttributeSchema
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size == 0:
            values = values.reshape(0, self.schema.n_attributes)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.schema.label is None:
            raise ContractViolation("a Dataset schema needs a label attribute")
        if values.ndim != 2 or values.shape[1] != self.schema.n_attributes:
            raise ContractViolation(
                f"values shape {values.shape} does not match "
                f"{self.schema.n_attributes} attributes")
        if labels.shape[0] != values.shape[0]:
            raise ContractViolation("one label per sample required")
        if labels.size and (labels.min() < 0 or labels.max() >= self.schema.n_labels):
            raise ContractViolation("label index outside the label domain")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_samples(cls, schema: AttributeSchema, samples: Iterable[Sample | tuple]) -> Dataset:
        samples = list(samples)
        values = [list(s[0]) for s in samples]
        labels = [int(s[1]) for s in samples]
        return cls(schema, np.array(values, dtype=np.float64).reshape(len(samples), -1)
                   if samples else np.zeros((0, schema.n_attributes)), labels)

    @property
    def samples(self) -> list[Sample]:
        return [Sample(tuple(v), int(c)) for v, c in zip(self.values.tolist(), self.labels.tolist())]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.schema == other.schema
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.labels, other.labels))

    __hash__ = None

    def __repr__(self):
        return f"Dataset(n={len(self)}, attributes={self.schema.attributes}, labels={self.schema.label.domain})"


@dataclass(frozen=True, eq=False)
class QuerySet:
    """Unlabeled instances to classify; shares its schema with the paired Dataset."""

    schema: AttributeSchema
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size == 0:
            values = values.reshape(0, self.schema.n_attributes)
        if values.ndim != 2 or values.shape[1] != self.schema.n_attributes:
            raise ContractViolation(
                f"query shape {values.shape} does not match "
                f"{self.schema.n_attributes} attributes")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def queries(self) -> list[tuple[float, ...]]:
        return [tuple(row) for row in self.values.tolist()]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, QuerySet):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.values, other.values)

    __hash__ = None

    def __repr__(self):
        return f"QuerySet(n={len(self)}, attributes={self.schema.attributes})"


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    attribute_count: int = 4
    label_count: int = 5
    value_range: tuple[int, int] = (0, 100)
    train_size_range: tuple[int, int] = (10, 200)
    query_count: int = 20

    def __post_init__(self):
        object.__setattr__(self, "value_range", tuple(self.value_range))
        object.__setattr__(self, "train_size_range", tuple(self.train_size_range))
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.attribute_count < 1 or self.label_count < 1:
            raise ConfigError("attribute_count and label_count must be positive")
        if self.query_count < 0:
            raise ConfigError("query_count must be non-negative")
        lo, hi = self.value_range
        if lo > hi:
            raise ConfigError(f"empty value range {self.value_range}")
        lo, hi = self.train_size_range
        if lo > hi or lo < 1:
            raise ConfigError(f"invalid training size range {self.train_size_range}")

    def with_seed(self, seed: int) -> GeneratorConfig:
        return GeneratorConfig(seed, self.attribute_count, self.label_count,
                               self.value_range, self.train_size_range, self.query_count)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "attribute_count": self.attribute_count,
            "label_count": self.label_count,
            "value_range": list(self.value_range),
            "train_size_range": list(self.train_size_range),
            "query_count": self.query_count,
        }


def generate_random_case(config: GeneratorConfig) -> tuple[Dataset, QuerySet]:
    """Draw a random (training set, query set) pair.

    Training size, every attribute value and every label are drawn uniformly
    from the configured inclusive ranges. Duplicate samples are allowed.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.train_size_range
    n = int(rng.integers(lo, hi + 1))
    vlo, vhi = config.value_range
    m = config.attribute_count
    values = rng.integers(vlo, vhi + 1, size=(n, m))
    labels = rng.integers(0, config.label_count, size=n)
    queries = rng.integers(vlo, vhi + 1, size=(config.query_count, m))
    schema = AttributeSchema.default(m, config.label_count)
    return Dataset(schema, values, labels), QuerySet(schema, queries)


# --- ARFF subset ------------------------------------------------------------

_NUMERIC_TYPES = {"numeric", "real", "integer"}


def _format_value(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _parse_value(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ArffError(f"not a number: {token!r}", lineno) from None


def parse_arff(text: str, kind: str | None = None) -> Dataset | QuerySet:
    """Parse the ARFF subset: numeric attributes, one trailing nominal label.

    A file whose rows carry labels parses as a Dataset; rows whose label is
    ``?`` (or a file without a label attribute) parse as a QuerySet. An empty
    ``@data`` section parses as an empty Dataset unless ``kind="queries"``.
    """
    if kind not in (None, "dataset", "queries"):
        raise ValueError(f"unknown kind {kind!r}")
    attributes: list[str] = []
    label: LabelAttribute | None = None
    rows: list[tuple[list[float], str | None]] = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if in_data:
            tokens = [t.strip() for t in line.split(",")]
            width = len(attributes) + (label is not None)
            if len(tokens) != width:
                raise ArffError(f"expected {width} fields, got {len(tokens)}", lineno)
            if label is None:
                rows.append(([_parse_value(t, lineno) for t in tokens], None))
                continue
            *feats, lab = tokens
            if lab != "?" and lab not in label.domain:
                raise ArffError(f"label {lab!r} not in domain {label.domain}", lineno)
            rows.append(([_parse_value(t, lineno) for t in feats], lab))
            continue
        head = line.split(None, 1)[0].lower()
        if head == "@relation":
            continue
        if head == "@data":
            in_data = True
            continue
        if head != "@attribute":
            raise ArffError(f"unexpected header line {line!r}", lineno)
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise ArffError("@attribute needs a name and a type", lineno)
        _, name, typ = parts
        if label is not None:
            raise ArffError("the nominal label attribute must be the last attribute", lineno)
        typ = typ.strip()
        if typ.lower() in _NUMERIC_TYPES:
            attributes.append(name)
        elif typ.startswith("{") and typ.endswith("}"):
            domain = [v.strip() for v in typ[1:-1].split(",")]
            if not domain or any(not v for v in domain):
                raise ArffError(f"bad nominal domain {typ!r}", lineno)
            try:
                label = LabelAttribute(name, tuple(domain))
            except ContractViolation as exc:
                raise ArffError(str(exc), lineno) from None
        else:
            raise ArffError(f"unsupported attribute type {typ!r}", lineno)
    if not in_data:
        raise ArffError("missing @data section")
    try:
        schema = AttributeSchema(tuple(attributes), label)
    except ContractViolation as exc:
        raise ArffError(str(exc)) from None
    values = np.array([r[0] for r in rows], dtype=np.float64).reshape(len(rows), len(attributes))
    unlabeled = [r[1] is None or r[1] == "?" for r in rows]
    if any(unlabeled) and not all(unlabeled):
        raise ArffError("rows mix labeled and unlabeled ('?') instances")
    as_queries = label is None or (bool(rows) and all(unlabeled))
    if kind == "queries" or (kind is None and as_queries):
        # Labels on rows read as queries are dropped.
        return QuerySet(schema, values)
    if as_queries:
        raise ArffError("file holds unlabeled rows but a Dataset was requested")
    labels = [label.index(r[1]) for r in rows]
    return Dataset(schema, values, labels)


def write_arff(data: Dataset | QuerySet) -> str:
    """Serialize in the layout of the sample data set: attributes, blank line, @data, rows."""
    schema = data.schema
    lines = [f"@attribute {a} numeric" for a in schema.attributes]
    if schema.label is not None:
        lines.append(f"@attribute {schema.label.name} {{{','.join(schema.label.domain)}}}")
    lines += ["", "@data"]
    if isinstance(data, Dataset):
        for row, c in zip(data.values.tolist(), data.labels.tolist()):
            lines.append(",".join([*map(_format_value, row), schema.label.domain[c]]))
    else:
        tail = [] if schema.label is None else ["?"]
        for row in data.values.tolist():
            lines.append(",".join([*map(_format_value, row), *tail]))
    return "\n".join(lines) + "\n"


# --- headerless CSV -----------------------------------------------------------

def parse_csv(text: str, schema: AttributeSchema | None = None, kind: str = "dataset") -> Dataset | QuerySet:
    """Read headerless comma-separated rows (label last for datasets).

    Without a schema, attributes are named ``att0..`` and the label domain is
    the sorted set of label strings seen (numerically sorted when all numeric).
    """
    if kind not in ("dataset", "queries"):
        raise ValueError(f"unknown kind {kind!r}")
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            rows.append((lineno, [t.strip() for t in line.split(",")]))
    labeled = kind == "dataset"
    if schema is None:
        if not rows:
            raise ArffError("cannot infer a schema from an empty CSV file")
        width = len(rows[0][1]) - labeled
        names = tuple(f"att{j}" for j in range(width))
        if labeled:
            seen = {r[-1] for _, r in rows}
            try:
                domain = sorted(seen, key=float)
            except ValueError:
                domain = sorted(seen)
            schema = AttributeSchema(names, LabelAttribute("class", tuple(domain)))
        else:
            schema = AttributeSchema(names)
    width = schema.n_attributes + labeled
    values, labels = [], []
    for lineno, tokens in rows:
        if len(tokens) != width:
            raise ArffError(f"expected {width} fields, got {len(tokens)}", lineno)
        values.append([_parse_value(t, lineno) for t in tokens[:schema.n_attributes]])
        if labeled:
            if tokens[-1] not in schema.label.domain:
                raise ArffError(f"label {tokens[-1]!r} not in domain", lineno)
            labels.append(schema.label.index(tokens[-1]))
    values = np.array(values, dtype=np.float64).reshape(len(rows), schema.n_attributes)
    if labeled:
        return Dataset(schema, values, labels)
    return QuerySet(schema, values)


def write_csv(data: Dataset | QuerySet) -> str:
    lines = []
    if isinstance(data, Dataset):
        for row, c in zip(data.values.tolist(), data.labels.tolist()):
            lines.append(",".join([*map(_format_value, row), data.schema.label.domain[c]]))
    else:
        for row in data.values.tolist():
            lines.append(",".join(map(_format_value, row)))
    return "\n".join(lines) + ("\n" if lines else "")


def load(path: str | Path, schema: AttributeSchema | None = None, kind: str | None = None) -> Dataset | QuerySet:
    """Read a ``.arff`` or ``.csv`` file, chosen by extension."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return parse_csv(text, schema, kind or "dataset")
    return parse_arff(text, kind)


def save(data: Dataset | QuerySet, path: str | Path) -> None:
    path = Path(path)
    text = write_csv(data) if path.suffix.lower() == ".csv" else write_arff(data)
    path.write_text(text)
