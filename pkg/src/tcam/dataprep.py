"""Tabular data ingestion and preprocessing.

The stages run in a fixed order: merge -> impute -> drop constants ->
standardize. A :class:`Dataset` remembers the last stage applied and each
stage refuses to run on data that has already passed a later one.
"""
from __future__ import annotations

import csv
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicatePositionError,
    InputError,
    OrphanChildWarning,
    PipelineOrderError,
    ZeroVarianceError,
)

MISSING_TOKENS = frozenset({"", "NA"})
STAGES = ("raw", "imputed", "deconstanted", "standardized")


def _empty_provenance() -> dict:
    return {"imputed": {}, "dropped": {}}


@dataclass
class Dataset:
    """``N x p`` numeric matrix (column-major) with names and provenance.

    ``provenance["imputed"]`` maps column name to the number of filled
    entries; ``provenance["dropped"]`` maps removed column names to the reason.
    """

    values: np.ndarray
    columns: list[str]
    provenance: dict = field(default_factory=_empty_provenance)
    stage: str = "raw"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise InputError(f"values shape {values.shape} does not match {len(self.columns)} columns")
        if len(set(self.columns)) != len(self.columns):
            raise InputError("column names must be unique")
        if self.stage not in STAGES:
            raise InputError(f"unknown stage {self.stage!r}")
        self.values = np.asfortranarray(values)
        self.columns = list(self.columns)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, key: int | str) -> np.ndarray:
        j = self.columns.index(key) if isinstance(key, str) else key
        return self.values[:, j]

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def _derive(self, values, columns, stage, provenance=None) -> "Dataset":
        prov = provenance if provenance is not None else self.provenance
        return Dataset(values, columns, _copy_provenance(prov), stage)


def _copy_provenance(prov: dict) -> dict:
    return {"imputed": dict(prov.get("imputed", {})), "dropped": dict(prov.get("dropped", {}))}


def _require_stage(data: Dataset, stage: str) -> None:
    if STAGES.index(data.stage) > STAGES.index(stage):
        raise PipelineOrderError(f"cannot run {stage!r} on data already at stage {data.stage!r}")


def impute_mean(data: Dataset) -> Dataset:
    """Fill missing entries with the column mean; drop columns with no observations."""
    _require_stage(data, "imputed")
    prov = _copy_provenance(data.provenance)
    keep, cols = [], []
    for j, name in enumerate(data.columns):
        x = data.values[:, j].copy()
        miss = np.isnan(x)
        if miss.all():
            prov["dropped"][name] = "all_missing"
            continue
        if miss.any():
            x[miss] = x[~miss].mean()
            prov["imputed"][name] = int(miss.sum())
        keep.append(x)
        cols.append(name)
    values = np.column_stack(keep) if keep else np.empty((data.n_rows, 0))
    return data._derive(values, cols, "imputed", prov)


def drop_constant(data: Dataset) -> Dataset:
    """Remove columns that take a single distinct value."""
    _require_stage(data, "deconstanted")
    prov = _copy_provenance(data.provenance)
    keep = []
    for j, name in enumerate(data.columns):
        x = data.values[:, j]
        if np.unique(x[~np.isnan(x)]).size <= 1:
            prov["dropped"][name] = "constant"
        else:
            keep.append(j)
    return data._derive(data.values[:, keep], [data.columns[j] for j in keep], "deconstanted", prov)


def standardize(data: Dataset) -> Dataset:
    """Center each column and scale it to unit population (1/N) variance."""
    _require_stage(data, "standardized")
    if np.isnan(data.values).any():
        raise InputError("standardize needs complete data; run impute_mean first")
    mean = data.values.mean(axis=0)
    centered = data.values - mean
    sd = np.sqrt((centered**2).mean(axis=0))
    bad = [data.columns[j] for j in np.flatnonzero(sd == 0)]
    if bad:
        raise ZeroVarianceError(f"constant columns cannot be standardized: {bad}")
    return data._derive(centered / sd, data.columns, "standardized")


def preprocess(data: Dataset) -> Dataset:
    return standardize(drop_constant(impute_mean(data)))


# -- CSV ---------------------------------------------------------------------


def _parse_cell(token: str, where: str) -> float:
    token = token.strip()
    if token in MISSING_TOKENS:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise InputError(f"non-numeric value {token!r} at {where}") from None


def read_csv(path: str | Path, exclude: Iterable[str] = ()) -> Dataset:
    """Read a comma-separated file with a header row; ``NA`` or empty means missing.

    Columns named in ``exclude`` (identifiers, say) are skipped.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    exclude = set(exclude)
    missing = exclude - set(header)
    if missing:
        raise InputError(f"{path}: no column(s) {sorted(missing)}")
    keep = [j for j, h in enumerate(header) if h not in exclude]
    body = [r for r in rows[1:] if r]
    values = np.empty((len(body), len(keep)))
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise InputError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for out_j, j in enumerate(keep):
            values[i, out_j] = _parse_cell(row[j], f"{path}:{i + 2}:{header[j]}")
    return Dataset(values, [header[j] for j in keep])


def _format(v: float) -> str:
    return "NA" if np.isnan(v) else repr(float(v))


def write_csv(data: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.columns)
        for row in data.values:
            w.writerow([_format(v) for v in row])


# -- hierarchical merge --------------------------------------------------------


@dataclass
class PartTable:
    """Measurements per part: one row per identifier, numeric columns by name."""

    ids: list[str]
    columns: "OrderedDict[str, np.ndarray]"

    def __post_init__(self):
        self.ids = [str(i) for i in self.ids]
        if len(set(self.ids)) != len(self.ids):
            raise InputError("part identifiers must be unique")
        self.columns = OrderedDict((k, np.asarray(v, dtype=float)) for k, v in self.columns.items())
        for name, v in self.columns.items():
            if v.shape != (len(self.ids),):
                raise InputError(f"column {name!r} has {v.shape[0]} values for {len(self.ids)} parts")

    def row(self, part_id: str) -> int:
        return self.ids.index(part_id)

    def to_dataset(self) -> Dataset:
        values = np.column_stack(list(self.columns.values())) if self.columns else np.empty((len(self.ids), 0))
        return Dataset(values, list(self.columns))


def read_part_table(path: str | Path, id_column: str = "id") -> PartTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = [h.strip() for h in rows[0]]
    if id_column not in header:
        raise InputError(f"{path}: missing id column {id_column!r}")
    id_pos = header.index(id_column)
    body = [r for r in rows[1:] if r]
    ids = [r[id_pos].strip() for r in body]
    cols = OrderedDict()
    for j, name in enumerate(header):
        if j == id_pos:
            continue
        cols[name] = [_parse_cell(r[j], f"{path}:{i + 2}:{name}") for i, r in enumerate(body)]
    return PartTable(ids, cols)


def write_part_table(table: PartTable, path: str | Path, id_column: str = "id") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column, *table.columns])
        for i, pid in enumerate(table.ids):
            w.writerow([pid, *(_format(col[i]) for col in table.columns.values())])


def read_bom(path: str | Path) -> list[tuple[str, str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"child_id", "mother_id", "position"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise InputError(f"{path}: BoM needs columns {sorted(needed)}")
        return [(r["child_id"].strip(), r["mother_id"].strip(), r["position"].strip()) for r in reader]


def _position_key(pos: str):
    try:
        return (0, float(pos), pos)
    except ValueError:
        return (1, 0.0, pos)


def merge_bom(
    mother: PartTable,
    children: Sequence[PartTable],
    bom: Iterable[tuple[str, str, str]],
) -> PartTable:
    """Widen ``mother`` with the measurements of the children placed in it.

    The child column ``c`` at position ``pos`` becomes ``"<pos>.c"``. Mothers
    with no child at some position get missing values there. Children that
    no BoM row places into a known mother are dropped with a warning.
    """
    where = {}
    for t_idx, table in enumerate(children):
        for r, cid in enumerate(table.ids):
            if cid in where:
                raise InputError(f"child id {cid!r} appears in more than one table")
            where[cid] = (t_idx, r)
    mother_row = {mid: i for i, mid in enumerate(mother.ids)}

    placed = {}  # (mother_id, position) -> child_id
    used = set()
    for child_id, mother_id, position in bom:
        child_id, mother_id, position = str(child_id), str(mother_id), str(position)
        if child_id not in where or mother_id not in mother_row:
            continue
        key = (mother_id, position)
        if key in placed:
            raise DuplicatePositionError(f"mother {mother_id!r} has two children at position {position!r}")
        placed[key] = child_id
        used.add(child_id)

    orphans = sorted(set(where) - used)
    if orphans:
        warnings.warn(f"children without a mother are excluded: {orphans}", OrphanChildWarning, stacklevel=2)

    # column layout: positions in natural order, child columns in table order
    layout: "OrderedDict[str, list[str]]" = OrderedDict()
    for pos in sorted({pos for (_, pos) in placed}, key=_position_key):
        tables = sorted({where[cid][0] for (_, p), cid in placed.items() if p == pos})
        names: list[str] = []
        for t_idx in tables:
            names.extend(n for n in children[t_idx].columns if n not in names)
        layout[pos] = names

    out = OrderedDict((name, col.copy()) for name, col in mother.columns.items())
    n = len(mother.ids)
    for pos, names in layout.items():
        for name in names:
            new = f"{pos}.{name}"
            if new in out:
                raise InputError(f"merged column {new!r} collides with an existing column")
            out[new] = np.full(n, np.nan)
    for (mid, pos), cid in placed.items():
        t_idx, r = where[cid]
        for name, col in children[t_idx].columns.items():
            out[f"{pos}.{name}"][mother_row[mid]] = col[r]
    return PartTable(list(mother.ids), out)
