"""
Mixed-type dataset store and CSV ingestion.

A Dataset keeps four aligned blocks over the same n samples:

    num     n x d_n float64   numerical features
    cat     n x d_c int64     categorical features, dense ids per column
    sens    n x U   int64     sensitive attributes, dense group ids per column
    labels  n       int64     optional ground-truth classes

Ids are assigned in first-appearance order so that every downstream tie-break
can be reproduced from the raw file alone.
"""

import hashlib
import io
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from dataio.schema import Role, Schema
from utils.errors import DataError, RoutingError

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureSpace:
    """
    Names and category dictionaries of a dataset's columns.

    This is everything a fitted tree needs to route raw rows and to print its
    rules, so it travels with the model document.
    """

    num_names: tuple[str, ...] = ()
    cat_names: tuple[str, ...] = ()
    sens_names: tuple[str, ...] = ()
    cat_tokens: tuple[tuple[str, ...], ...] = ()
    sens_tokens: tuple[tuple[str, ...], ...] = ()
    label_name: str | None = None
    label_tokens: tuple[str, ...] = ()
    # set by standardize(); routing maps raw values through (x - center) / scale
    center: tuple[float, ...] | None = None
    scale: tuple[float, ...] | None = None

    @property
    def standardized(self) -> bool:
        return self.center is not None

    def to_model_units(self, num: np.ndarray) -> np.ndarray:
        if not self.standardized:
            return num
        return (num - np.asarray(self.center)) / np.asarray(self.scale)

    def to_raw_units(self, feature: int, value: float) -> float:
        if not self.standardized:
            return value
        return value * self.scale[feature] + self.center[feature]

    def encode_rows(self, frame: pd.DataFrame, permissive: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """
        Encode raw string rows into (num, cat) arrays in model units.

        Unknown category tokens raise RoutingError naming row and column; with
        `permissive` they are encoded as -1, which no categorical rule holds on
        its left side, so such samples route RIGHT.
        """
        missing = [c for c in (*self.num_names, *self.cat_names) if c not in frame.columns]
        if missing:
            raise RoutingError(f"missing feature column(s): {', '.join(missing)}")
        n = len(frame)
        num = np.empty((n, len(self.num_names)), dtype=np.float64)
        for f, name in enumerate(self.num_names):
            num[:, f] = _parse_numeric(frame[name], name, error=RoutingError)
        cat = np.empty((n, len(self.cat_names)), dtype=np.int64)
        for j, name in enumerate(self.cat_names):
            lookup = {token: i for i, token in enumerate(self.cat_tokens[j])}
            values = frame[name].astype(str).str.strip()
            codes = values.map(lookup)
            unknown = codes.isna().to_numpy()
            if unknown.any() and not permissive:
                row = int(np.flatnonzero(unknown)[0])
                raise RoutingError(f"unknown category '{values.iloc[row]}'", row=row, column=name)
            cat[:, j] = codes.fillna(-1).to_numpy(dtype=np.int64)
        return self.to_model_units(num), cat


@dataclass(frozen=True)
class Dataset:
    num: np.ndarray
    cat: np.ndarray
    sens: np.ndarray
    features: FeatureSpace
    labels: np.ndarray | None = None
    fingerprint: str = ""
    _card: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        num = _frozen(self.num, np.float64)
        n = num.shape[0]
        cat = _frozen(np.asarray(self.cat).reshape(n, -1) if n else self.cat, np.int64)
        sens = _frozen(np.asarray(self.sens).reshape(n, -1) if n else self.sens, np.int64)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "cat", cat)
        object.__setattr__(self, "sens", sens)
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(self.labels, np.int64))

        if n < 1:
            raise DataError("dataset has no samples")
        if num.ndim != 2 or cat.shape[0] != n or sens.shape[0] != n:
            raise DataError("feature blocks disagree on the number of samples")
        if num.shape[1] + cat.shape[1] < 1:
            raise DataError("dataset needs at least one numerical or categorical feature")
        if not np.all(np.isfinite(num)):
            raise DataError("numerical features must be finite")
        if self.labels is not None and self.labels.shape != (n,):
            raise DataError("labels must be one value per sample")
        fs = self.features
        if len(fs.num_names) != num.shape[1] or len(fs.cat_names) != cat.shape[1] or len(fs.sens_names) != sens.shape[1]:
            raise DataError("feature names do not match the data blocks")
        for block, tokens, names in ((cat, fs.cat_tokens, fs.cat_names), (sens, fs.sens_tokens, fs.sens_names)):
            for j, name in enumerate(names):
                if block[:, j].min() < 0 or block[:, j].max() >= len(tokens[j]):
                    raise DataError("ids outside the column dictionary", column=name)
        object.__setattr__(self, "_card", tuple(len(t) for t in fs.cat_tokens))

    @property
    def n(self) -> int:
        return self.num.shape[0]

    @property
    def d_n(self) -> int:
        return self.num.shape[1]

    @property
    def d_c(self) -> int:
        return self.cat.shape[1]

    @property
    def n_attributes(self) -> int:
        return self.sens.shape[1]

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return self._card

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.features.sens_tokens)

    @classmethod
    def from_arrays(
        cls,
        num=None,
        cat=None,
        sens=None,
        labels=None,
        num_names=None,
        cat_names=None,
        sens_names=None,
    ) -> "Dataset":
        """
        Build a dataset from in-memory arrays.

        Categorical and sensitive columns may hold any hashable values; they are
        re-encoded in first-appearance order with their string form as token.
        """
        blocks = [np.asarray(b) for b in (num, cat, sens) if b is not None]
        if not blocks:
            raise DataError("no feature arrays given")
        n = len(blocks[0])
        num = np.empty((n, 0)) if num is None else np.asarray(num, dtype=np.float64).reshape(n, -1)
        cat_raw = np.empty((n, 0), dtype=object) if cat is None else np.asarray(cat, dtype=object).reshape(n, -1)
        sens_raw = np.empty((n, 0), dtype=object) if sens is None else np.asarray(sens, dtype=object).reshape(n, -1)

        cat_codes, cat_tokens = _factorize_block(cat_raw)
        sens_codes, sens_tokens = _factorize_block(sens_raw)
        label_ids, label_tokens = None, ()
        if labels is not None:
            codes, uniques = pd.factorize(pd.Series(np.asarray(labels, dtype=object)).astype(str), sort=False)
            label_ids, label_tokens = codes, tuple(uniques)

        features = FeatureSpace(
            num_names=tuple(num_names or (f"x{i}" for i in range(num.shape[1]))),
            cat_names=tuple(cat_names or (f"c{i}" for i in range(cat_raw.shape[1]))),
            sens_names=tuple(sens_names or (f"s{i}" for i in range(sens_raw.shape[1]))),
            cat_tokens=cat_tokens,
            sens_tokens=sens_tokens,
            label_name="label" if labels is not None else None,
            label_tokens=label_tokens,
        )
        digest = hashlib.sha256()
        for block in (num, cat_codes, sens_codes):
            digest.update(np.ascontiguousarray(block).tobytes())
        return cls(num, cat_codes, sens_codes, features, labels=label_ids, fingerprint=digest.hexdigest())


def _factorize_block(raw: np.ndarray) -> tuple[np.ndarray, tuple[tuple[str, ...], ...]]:
    codes = np.empty(raw.shape, dtype=np.int64)
    tokens = []
    for j in range(raw.shape[1]):
        ids, uniques = pd.factorize(pd.Series(raw[:, j]).astype(str), sort=False)
        codes[:, j] = ids
        tokens.append(tuple(uniques))
    return codes, tuple(tokens)


def _parse_numeric(values: pd.Series, column: str, error=DataError) -> np.ndarray:
    parsed = pd.to_numeric(values.astype(str).str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(parsed)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise error(f"cannot parse '{values.iloc[row]}' as a finite number", row=row, column=column)
    return parsed


def read_table(raw: bytes, source: str = "input") -> pd.DataFrame:
    """
    Parse CSV bytes into a frame of stripped strings.

    The header is read as an ordinary row so that a data row with more fields
    than the header is a parse error instead of a silent row index.
    """
    if not raw.strip():
        raise DataError(f"{source} is empty")
    try:
        frame = pd.read_csv(io.BytesIO(raw), header=None, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError(f"{source} is empty") from None
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"{source} is not a readable CSV file: {e}") from None
    frame = frame.fillna("")
    header = [str(name) for name in frame.iloc[0]]
    duplicated = sorted({name for name in header if header.count(name) > 1})
    if duplicated:
        raise DataError(f"{source} repeats column(s) {', '.join(duplicated)}")
    frame = frame.iloc[1:].reset_index(drop=True)
    frame.columns = header
    if frame.empty:
        raise DataError(f"{source} has a header but no rows")
    return frame.apply(lambda col: col.str.strip())


def load_csv(csv_path: str | os.PathLike, schema: Schema) -> Dataset:
    try:
        with open(csv_path, "rb") as f:
            raw = f.read()
    except FileNotFoundError:
        raise DataError(f"data file not found: {csv_path}") from None

    frame = read_table(raw, source=str(csv_path))
    wanted = [name for name, role in schema.columns if role != Role.IGNORE]
    for name in wanted:
        if name not in frame.columns:
            raise DataError("missing column", column=name)
    extra = [c for c in frame.columns if c not in dict(schema.columns)]
    if extra:
        logger.warning("Ignoring columns not named in the schema: %s", ", ".join(extra))

    blank = frame[wanted].eq("").to_numpy()
    if blank.any():
        row, col = np.argwhere(blank)[0]
        raise DataError("missing value", row=int(row), column=wanted[col])

    num_names = schema.names(Role.NUMERICAL)
    num = np.column_stack([_parse_numeric(frame[c], c) for c in num_names]) if num_names else np.empty((len(frame), 0))

    def encode(names):
        codes = np.empty((len(frame), len(names)), dtype=np.int64)
        tokens = []
        for j, name in enumerate(names):
            ids, uniques = pd.factorize(frame[name], sort=False)
            codes[:, j] = ids
            tokens.append(tuple(uniques))
        return codes, tuple(tokens)

    cat_names = schema.names(Role.CATEGORICAL)
    sens_names = schema.names(Role.SENSITIVE)
    cat, cat_tokens = encode(cat_names)
    sens, sens_tokens = encode(sens_names)
    labels, label_tokens = None, ()
    if schema.label is not None:
        ids, uniques = pd.factorize(frame[schema.label], sort=False)
        labels, label_tokens = ids, tuple(uniques)

    features = FeatureSpace(
        num_names=tuple(num_names),
        cat_names=tuple(cat_names),
        sens_names=tuple(sens_names),
        cat_tokens=cat_tokens,
        sens_tokens=sens_tokens,
        label_name=schema.label,
        label_tokens=label_tokens,
    )
    ds = Dataset(num, cat, sens, features, labels=labels, fingerprint=hashlib.sha256(raw).hexdigest())
    logger.info(
        "Loaded %s: n=%d d_n=%d d_c=%d U=%d", csv_path, ds.n, ds.d_n, ds.d_c, ds.n_attributes
    )
    return ds


def standardize(ds: Dataset) -> Dataset:
    """
    Scale every numerical column to mean 0 and unit variance.

    Zero-variance columns are left as they are. The applied transform is
    composed into the feature space so that routing raw rows stays exact.
    """
    if ds.d_n == 0:
        return ds
    mean = ds.num.mean(axis=0)
    std = ds.num.std(axis=0)
    constant = np.ptp(ds.num, axis=0) == 0
    mean = np.where(constant, 0.0, mean)
    std = np.where(constant, 1.0, std)
    num = (ds.num - mean) / std

    fs = ds.features
    old_center = np.asarray(fs.center) if fs.standardized else np.zeros(ds.d_n)
    old_scale = np.asarray(fs.scale) if fs.standardized else np.ones(ds.d_n)
    features = replace(
        fs,
        center=tuple(float(v) for v in old_center + old_scale * mean),
        scale=tuple(float(v) for v in old_scale * std),
    )
    return replace(ds, num=num, features=features)
