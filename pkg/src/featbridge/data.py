"""Dataset schema, CSV ingestion, categorical encoding, splits and batching.

Every feature is treated as categorical: each field gets its own vocabulary
built from the training split, with index 0 reserved for values never seen
in training.  Float fields are bucketed by unique value, so the encoder has
a single code path regardless of declared dtype.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError, InputError, SchemaError

FIELD_DTYPES = ("integer", "string", "float")
FIELD_ROLES = ("user", "item", "interaction")

SPLITS = ("train", "valid", "test")
_SPLIT_ID = {name: i for i, name in enumerate(SPLITS)}

DEFAULT_SPLIT_RATIOS = (0.7, 0.2, 0.1)
DEFAULT_BATCH_SIZE = 4096


@dataclass(frozen=True)
class FeatureField:
    """Metadata for one categorical field, as shown to ranking experts."""

    name: str
    description: str
    dtype: str
    example_value: str
    cardinality: int
    role: str

    def __post_init__(self):
        if not self.name:
            raise SchemaError("feature field needs a name")
        if not self.description:
            raise SchemaError(f"field '{self.name}' needs a non-empty description")
        if self.dtype not in FIELD_DTYPES:
            raise SchemaError(f"field '{self.name}' dtype must be one of {FIELD_DTYPES}")
        if self.role not in FIELD_ROLES:
            raise SchemaError(f"field '{self.name}' role must be one of {FIELD_ROLES}")
        if self.cardinality < 1:
            raise SchemaError(f"field '{self.name}' cardinality must be >= 1")


@dataclass
class DatasetSchema:
    """Declares the task, every feature field, the label column and the seeds.

    ``seed_features`` are the fields every ranking starts from (typically the
    user and item identifiers); they are pinned to the head of all rankings.
    """

    task_description: str
    dataset_description: str
    fields: list[FeatureField]
    label_name: str
    seed_features: list[str] = field(default_factory=list)

    def __post_init__(self):
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate field names in schema: {dupes}")
        if self.label_name in names:
            raise SchemaError(f"label '{self.label_name}' must not be a feature field")
        unknown = [s for s in self.seed_features if s not in names]
        if unknown:
            raise SchemaError(f"seed features not in schema: {unknown}")
        if len(self.fields) < len(self.seed_features):
            raise SchemaError("more seed features than fields")

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    @property
    def non_seed_names(self) -> list[str]:
        seeds = set(self.seed_features)
        return [n for n in self.field_names if n not in seeds]

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    def field_by_name(self, name: str) -> FeatureField:
        for f in self.fields:
            if f.name == name:
                return f
        raise SchemaError(f"field '{name}' not in schema")

    def to_json_obj(self) -> dict:
        return {
            "task_description": self.task_description,
            "dataset_description": self.dataset_description,
            "label_name": self.label_name,
            "seed_features": list(self.seed_features),
            "fields": [
                {
                    "name": f.name,
                    "description": f.description,
                    "dtype": f.dtype,
                    "example_value": f.example_value,
                    "cardinality": f.cardinality,
                    "role": f.role,
                }
                for f in self.fields
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "DatasetSchema":
        try:
            fields = [FeatureField(**fld) for fld in obj["fields"]]
            return cls(
                task_description=obj["task_description"],
                dataset_description=obj["dataset_description"],
                fields=fields,
                label_name=obj["label_name"],
                seed_features=list(obj.get("seed_features", [])),
            )
        except KeyError as exc:
            raise SchemaError(f"schema file missing key {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetSchema":
        return cls.from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Batch:
    """One minibatch: an index matrix (batch x fields) and its labels."""

    indices: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


class EncodedDataset:
    """Raw categorical values plus their train-vocabulary integer encoding.

    The raw value matrix is retained so that re-splitting can rebuild the
    vocabularies from the new training rows; valid/test values unseen in
    training always map to index 0.  Instances are read-only after
    construction: ``split`` and ``select_fields`` return new objects.
    """

    def __init__(
        self,
        field_names: Sequence[str],
        raw_values: np.ndarray,
        labels: np.ndarray,
        split_ids: np.ndarray | None = None,
    ):
        raw_values = np.asarray(raw_values, dtype=object)
        if raw_values.ndim != 2 or raw_values.shape[1] != len(field_names):
            raise DataError("raw value matrix must be n_samples x n_fields")
        if len(labels) != len(raw_values):
            raise DataError("labels length must match sample count")
        bad = set(np.unique(labels)) - {0.0, 1.0}
        if bad:
            raise DataError(f"labels must be 0/1, got {sorted(bad)}")
        self.field_names = list(field_names)
        self.raw_values = raw_values
        self.labels = np.asarray(labels, dtype=np.float64)
        if split_ids is None:
            split_ids = np.zeros(len(labels), dtype=np.int8)
        self.split_ids = np.asarray(split_ids, dtype=np.int8)
        self.vocabs: list[dict[str, int]] = []
        self.indices = np.empty(raw_values.shape, dtype=np.int64)
        self._encode_from_train()

    def _encode_from_train(self) -> None:
        train_rows = self.split_ids == _SPLIT_ID["train"]
        for j in range(self.n_fields):
            col = self.raw_values[:, j]
            train_col = col[train_rows]
            uniq, first = np.unique(train_col.astype(str), return_index=True)
            order = np.argsort(first, kind="stable")
            vocab = {v: i + 1 for i, v in enumerate(uniq[order])}
            self.vocabs.append(vocab)
            self.indices[:, j] = [vocab.get(str(v), 0) for v in col]

    @property
    def n_samples(self) -> int:
        return len(self.labels)

    @property
    def n_fields(self) -> int:
        return len(self.field_names)

    @property
    def vocab_sizes(self) -> list[int]:
        # +1 for the reserved out-of-vocabulary index 0
        return [len(v) + 1 for v in self.vocabs]

    def rows_for(self, split: str) -> np.ndarray:
        if split not in _SPLIT_ID:
            raise ValueError(f"unknown split '{split}', expected one of {SPLITS}")
        return np.nonzero(self.split_ids == _SPLIT_ID[split])[0]

    def encode_value(self, field_name: str, value: str) -> int:
        j = self._field_index(field_name)
        return self.vocabs[j].get(str(value), 0)

    def decode_index(self, field_name: str, index: int) -> str | None:
        """Inverse of encode_value for in-vocabulary indices; None for OOV."""
        j = self._field_index(field_name)
        if index == 0:
            return None
        for value, idx in self.vocabs[j].items():
            if idx == index:
                return value
        raise ValueError(f"index {index} out of range for field '{field_name}'")

    def _field_index(self, name: str) -> int:
        try:
            return self.field_names.index(name)
        except ValueError:
            raise SchemaError(f"field '{name}' not in dataset") from None

    def select_fields(self, names: Sequence[str]) -> "EncodedDataset":
        """New dataset over a subset of fields; splits and vocabs unchanged."""
        cols = [self._field_index(n) for n in names]
        out = object.__new__(EncodedDataset)
        out.field_names = [self.field_names[c] for c in cols]
        out.raw_values = self.raw_values[:, cols]
        out.labels = self.labels
        out.split_ids = self.split_ids
        out.vocabs = [dict(self.vocabs[c]) for c in cols]
        out.indices = self.indices[:, cols]
        return out


def load_csv(schema: DatasetSchema, path: str | Path) -> EncodedDataset:
    """Read a headered CSV into an encoded dataset (all rows in train).

    Row order is preserved; call :func:`split` afterwards to partition and
    re-derive vocabularies from the training rows only.  Label handling:
    a column whose distinct values are all 0/1 passes through, anything
    else is read as a rating and thresholded at "greater than 3".
    """
    path = Path(path)
    if not path.exists():
        raise InputErrorFactory(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"no samples in {path}") from None
        col_of = {name: i for i, name in enumerate(header)}
        missing = [n for n in schema.field_names + [schema.label_name] if n not in col_of]
        if missing:
            raise SchemaError(f"column '{missing[0]}' missing from {path}")
        feat_cols = [col_of[n] for n in schema.field_names]
        label_col = col_of[schema.label_name]
        raw_rows: list[list[str]] = []
        label_tokens: list[tuple[int, str]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) <= max(max(feat_cols), label_col):
                raise DataError(f"line {line_no} of {path} has too few columns")
            raw_rows.append([row[c] for c in feat_cols])
            label_tokens.append((line_no, row[label_col]))
    if not raw_rows:
        raise DataError(f"no samples in {path}")
    labels = _parse_labels(label_tokens, path)
    raw = np.asarray(raw_rows, dtype=object)
    return EncodedDataset(schema.field_names, raw, labels)


def _parse_labels(tokens: list[tuple[int, str]], path: Path) -> np.ndarray:
    values = np.empty(len(tokens), dtype=np.float64)
    for i, (line_no, tok) in enumerate(tokens):
        try:
            values[i] = float(tok)
        except ValueError:
            raise DataError(f"unparseable label {tok!r} at line {line_no} of {path}") from None
    if set(np.unique(values)) <= {0.0, 1.0}:
        return values
    return (values > 3.0).astype(np.float64)


def InputErrorFactory(path: Path):
    # local import avoids a cycle with errors<->data typing helpers
    from .errors import InputError

    return InputError(f"file not found: {path}")


def split(
    ds: EncodedDataset,
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
    seed: int = 0,
) -> EncodedDataset:
    """Shuffle deterministically and partition into train/valid/test.

    Valid and test sizes are floored; the remainder goes to train.  The
    returned dataset is re-encoded so the vocabulary reflects the new
    training rows only.
    """
    if len(ratios) != 3:
        raise ValueError("ratios must be (train, valid, test)")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be non-negative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = ds.n_samples
    n_valid = math.floor(n * ratios[1])
    n_test = math.floor(n * ratios[2])
    n_train = n - n_valid - n_test
    if min(n_train, n_valid, n_test) == 0:
        raise DataError(
            f"empty split: sizes train={n_train} valid={n_valid} test={n_test}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    split_ids = np.empty(n, dtype=np.int8)
    split_ids[perm[:n_train]] = _SPLIT_ID["train"]
    split_ids[perm[n_train : n_train + n_valid]] = _SPLIT_ID["valid"]
    split_ids[perm[n_train + n_valid :]] = _SPLIT_ID["test"]
    return EncodedDataset(ds.field_names, ds.raw_values, ds.labels, split_ids)


def batches(
    ds: EncodedDataset,
    split_name: str,
    batch_size: int = DEFAULT_BATCH_SIZE,
    shuffle_seed: int | None = None,
    epoch: int = 0,
) -> Iterator[Batch]:
    """Yield minibatches covering the split exactly once.

    With ``shuffle_seed`` set, the order is a deterministic function of
    (seed, epoch); without it, stored row order is used.  The last batch
    may be short.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rows = ds.rows_for(split_name)
    if shuffle_seed is not None:
        perm = np.random.default_rng([shuffle_seed, epoch]).permutation(len(rows))
        rows = rows[perm]
    for start in range(0, len(rows), batch_size):
        chunk = rows[start : start + batch_size]
        yield Batch(indices=ds.indices[chunk], labels=ds.labels[chunk])


def synthesize(
    n_informative: int,
    n_noise: int,
    n_collinear: int,
    n_samples: int,
    seed: int = 0,
) -> tuple[DatasetSchema, EncodedDataset, set[str]]:
    """Generate a labeled categorical dataset with planted structure.

    Informative fields move the label through a logistic model over
    per-category effects; noise fields are independent of the label; each
    collinear field is a bijective relabeling of one informative field.
    Two identifier fields are included as ranking seeds.  Returns the
    schema, an (unsplit) encoded dataset and the informative field names.
    """
    if n_informative < 1:
        raise ValueError("need at least one informative field")
    if min(n_noise, n_collinear) < 0:
        raise ValueError("field counts must be >= 0")
    if n_samples < 100:
        raise DataError("n_samples < 100 is too small to be meaningful")
    rng = np.random.default_rng(seed)

    specs: list[dict] = []
    for i in range(n_informative):
        card = int(rng.integers(6, 13))
        effects = rng.normal(0.0, 0.65, size=card)
        specs.append({"kind": "signal", "name": f"signal_{i}", "card": card, "effects": effects})
    for i in range(n_noise):
        card = int(rng.integers(6, 13))
        specs.append({"kind": "noise", "name": f"noise_{i}", "card": card})
    for i in range(n_collinear):
        src = specs[i % n_informative]
        relabel = rng.permutation(src["card"])
        specs.append(
            {
                "kind": "echo",
                "name": f"echo_{i}",
                "card": src["card"],
                "source": src["name"],
                "relabel": relabel,
            }
        )
    # deterministic interleave so informative fields are not clustered
    order = rng.permutation(len(specs))
    specs = [specs[k] for k in order]

    n_users, n_items = 200, 120
    user_col = rng.integers(0, n_users, size=n_samples)
    item_col = rng.integers(0, n_items, size=n_samples)

    logits = np.zeros(n_samples)
    columns: dict[str, np.ndarray] = {
        "user_id": user_col,
        "item_id": item_col,
    }
    source_values: dict[str, np.ndarray] = {}
    for spec in specs:
        if spec["kind"] == "echo":
            continue
        vals = rng.integers(0, spec["card"], size=n_samples)
        source_values[spec["name"]] = vals
        columns[spec["name"]] = vals
        if spec["kind"] == "signal":
            logits += spec["effects"][vals]
    for spec in specs:
        if spec["kind"] == "echo":
            columns[spec["name"]] = spec["relabel"][source_values[spec["source"]]]
    logits -= logits.mean()
    labels = (rng.random(n_samples) < 1.0 / (1.0 + np.exp(-logits))).astype(np.float64)

    fields = [
        FeatureField(
            name="user_id",
            description="Unique identifier of the user issuing the interaction.",
            dtype="integer",
            example_value="17",
            cardinality=n_users,
            role="user",
        ),
        FeatureField(
            name="item_id",
            description="Unique identifier of the item shown to the user.",
            dtype="integer",
            example_value="42",
            cardinality=n_items,
            role="item",
        ),
    ]
    roles = ("interaction", "item", "user")
    for i, spec in enumerate(specs):
        if spec["kind"] == "signal":
            desc = "Categorical signal; its categories shift the chance of a positive label."
        elif spec["kind"] == "noise":
            desc = "Random categorical field drawn independently of the label."
        else:
            desc = (
                f"One-to-one relabeling of {spec['source']}; same information "
                "under different category names."
            )
        fields.append(
            FeatureField(
                name=spec["name"],
                description=desc,
                dtype="integer",
                example_value="3",
                cardinality=spec["card"],
                role=roles[i % len(roles)],
            )
        )

    schema = DatasetSchema(
        task_description="Predict whether the user clicks the shown item.",
        dataset_description=(
            f"Synthetic interaction log with {n_samples} samples and "
            f"{len(fields)} categorical fields."
        ),
        fields=fields,
        label_name="click",
        seed_features=["user_id", "item_id"],
    )

    raw = np.empty((n_samples, len(fields)), dtype=object)
    for j, f in enumerate(fields):
        col = columns[f.name]
        raw[:, j] = np.char.add("v", col.astype(str)).astype(object)
    ds = EncodedDataset(schema.field_names, raw, labels)
    truth = {s["name"] for s in specs if s["kind"] == "signal"}
    return schema, ds, truth


def write_csv(schema: DatasetSchema, ds: EncodedDataset, path: str | Path) -> None:
    """Dump raw values plus labels as a headered CSV (synth helper)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.field_names + [schema.label_name])
        for i in range(ds.n_samples):
            row = [str(v) for v in ds.raw_values[i]]
            row.append(str(int(ds.labels[i])))
            writer.writerow(row)
