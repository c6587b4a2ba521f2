import warnings
from collections import OrderedDict

import numpy as np
import pytest

from tcam.dataprep import (
    Dataset,
    PartTable,
    drop_constant,
    impute_mean,
    merge_bom,
    preprocess,
    read_bom,
    read_csv,
    read_part_table,
    standardize,
    write_csv,
    write_part_table,
)
from tcam.errors import (
    DuplicatePositionError,
    InputError,
    OrphanChildWarning,
    PipelineOrderError,
    ZeroVarianceError,
)

nan = np.nan


def ds(cols):
    return Dataset(np.column_stack(list(cols.values())), list(cols))


# -- impute / drop / standardize -------------------------------------------------

def test_impute_mean_fills_gap():
    out = impute_mean(ds({"a": [1.0, nan, 3.0]}))
    assert list(out.values[:, 0]) == [1.0, 2.0, 3.0]
    assert out.provenance["imputed"] == {"a": 1}


def test_impute_without_missing_is_identity():
    data = ds({"a": [1.0, 5.0], "b": [2.0, 0.0]})
    out = impute_mean(data)
    assert np.array_equal(out.values, data.values)
    assert out.provenance["imputed"] == {}


def test_all_missing_column_is_dropped():
    out = impute_mean(ds({"a": [1.0, 2.0], "gone": [nan, nan]}))
    assert out.columns == ["a"]
    assert out.provenance["dropped"] == {"gone": "all_missing"}


def test_drop_constant():
    out = drop_constant(ds({"c": [4.0, 4.0, 4.0], "bin": [0.0, 1.0, 0.0]}))
    assert out.columns == ["bin"]
    assert out.provenance["dropped"] == {"c": "constant"}


def test_standardize_examples():
    out = standardize(ds({"a": [0.0, 2.0]}))
    assert list(out.values[:, 0]) == [-1.0, 1.0]
    rng = np.random.default_rng(0)
    once = standardize(Dataset(rng.standard_normal((200, 3)) * 5 + 2, ["a", "b", "c"]))
    assert np.abs(once.values.mean(axis=0)).max() < 1e-8
    assert np.abs((once.values**2).mean(axis=0) - 1).max() < 1e-8
    twice = standardize(Dataset(once.values, once.columns))
    assert np.abs(twice.values - once.values).max() < 1e-12


def test_standardize_errors():
    with pytest.raises(ZeroVarianceError):
        standardize(ds({"a": [1.0, 1.0]}))
    with pytest.raises(InputError):
        standardize(ds({"a": [1.0, nan, 2.0]}))


def test_stage_order_is_enforced():
    data = preprocess(ds({"a": [1.0, nan, 3.0, 0.5], "b": [1.0, 2.0, 2.0, 1.0]}))
    assert data.stage == "standardized"
    with pytest.raises(PipelineOrderError):
        impute_mean(data)
    with pytest.raises(PipelineOrderError):
        drop_constant(data)


def test_preprocess_records_provenance():
    data = preprocess(ds({"a": [1.0, nan, 3.0, 0.0], "k": [7.0] * 4, "m": [nan] * 4}))
    assert data.columns == ["a"]
    assert data.provenance == {"imputed": {"a": 1}, "dropped": {"k": "constant", "m": "all_missing"}}


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 2)), ["a", "a"])
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 3)), ["a", "b"])


# -- CSV --------------------------------------------------------------------------

def test_csv_missing_tokens(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,c\n1,NA,3\n,2.5,-1e-3\n")
    data = read_csv(path)
    assert data.columns == ["a", "b", "c"]
    assert np.isnan(data.values[0, 1]) and np.isnan(data.values[1, 0])
    assert data.values[1, 2] == -1e-3


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.standard_normal((5, 2))
    values[2, 1] = nan
    path = tmp_path / "d.csv"
    write_csv(Dataset(values, ["x", "y"]), path)
    back = read_csv(path)
    assert np.array_equal(back.values, values, equal_nan=True)


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,x\n")
    with pytest.raises(InputError):
        read_csv(bad)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("a,b\n1\n")
    with pytest.raises(InputError):
        read_csv(ragged)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(InputError):
        read_csv(empty)


def test_csv_exclude_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,a\nP1,1\nP2,2\n")
    assert read_csv(path, exclude=["id"]).columns == ["a"]
    with pytest.raises(InputError):
        read_csv(path, exclude=["nope"])


# -- BoM merge ----------------------------------------------------------------------

def table(ids, **cols):
    return PartTable(ids, OrderedDict((k, np.asarray(v, dtype=float)) for k, v in cols.items()))


def test_merge_two_children():
    mother = table(["M"], weight=[10.0])
    child = table(["c1", "c2"], thick=[1.5, 2.5])
    out = merge_bom(mother, [child], [("c1", "M", "1"), ("c2", "M", "2")])
    assert list(out.columns) == ["weight", "1.thick", "2.thick"]
    assert out.columns["1.thick"][0] == 1.5 and out.columns["2.thick"][0] == 2.5


def test_missing_child_gives_missing_values():
    mother = table(["M1", "M2"], w=[1.0, 2.0])
    child = table(["c1", "c2", "c3"], t=[5.0, 6.0, 7.0])
    out = merge_bom(mother, [child], [("c1", "M1", "1"), ("c2", "M1", "2"), ("c3", "M2", "1")])
    assert list(out.columns["2.t"][[0]]) == [6.0]
    assert np.isnan(out.columns["2.t"][1])


def test_orphan_child_warns():
    mother = table(["M"], w=[1.0])
    child = table(["c1", "lost"], t=[1.0, 2.0])
    with pytest.warns(OrphanChildWarning):
        out = merge_bom(mother, [child], [("c1", "M", "1")])
    assert list(out.columns) == ["w", "1.t"]


def test_duplicate_position():
    mother = table(["M"], w=[1.0])
    child = table(["c1", "c2"], t=[1.0, 2.0])
    with pytest.raises(DuplicatePositionError):
        merge_bom(mother, [child], [("c1", "M", "1"), ("c2", "M", "1")])


def test_two_level_hierarchy():
    grand = table(["g1", "g2"], thick=[0.1, 0.2])
    child = table(["c1"], len=[3.0])
    mother = table(["M"], w=[9.0])
    child_wide = merge_bom(child, [grand], [("g1", "c1", "1"), ("g2", "c1", "2")])
    full = merge_bom(mother, [child_wide], [("c1", "M", "1")])
    assert list(full.columns) == ["w", "1.len", "1.1.thick", "1.2.thick"]
    # hand join: grandchild g2 sits at position 2 of c1, which sits at position 1 of M
    assert full.columns["1.2.thick"][0] == 0.2


def test_bottom_up_order_does_not_matter():
    ga = table(["a1", "a2"], s=[1.0, 2.0])
    gb = table(["b1"], r=[5.0])
    ca = table(["A"], x=[0.5])
    cb = table(["B"], y=[0.7])
    mother = table(["M"], w=[1.0])
    bom_a = [("a1", "A", "1"), ("a2", "A", "2")]
    bom_b = [("b1", "B", "1")]
    top = [("A", "M", "1"), ("B", "M", "2")]
    # order 1: A's subtree first
    wa = merge_bom(ca, [ga], bom_a)
    wb = merge_bom(cb, [gb], bom_b)
    one = merge_bom(mother, [wa, wb], top)
    # order 2: B's subtree first, tables passed the other way round
    wb2 = merge_bom(cb, [gb], bom_b)
    wa2 = merge_bom(ca, [ga], bom_a)
    two = merge_bom(mother, [wb2, wa2], list(reversed(top)))
    assert set(one.columns) == set(two.columns)
    for name in one.columns:
        assert np.array_equal(one.columns[name], two.columns[name], equal_nan=True)


def test_part_table_files(tmp_path):
    (tmp_path / "m.csv").write_text("id,w\nM1,1\nM2,2\n")
    (tmp_path / "c.csv").write_text("id,t\nc1,5\nc2,NA\n")
    (tmp_path / "bom.csv").write_text("child_id,mother_id,position\nc1,M1,1\nc2,M2,1\n")
    out = merge_bom(read_part_table(tmp_path / "m.csv"), [read_part_table(tmp_path / "c.csv")],
                    read_bom(tmp_path / "bom.csv"))
    write_part_table(out, tmp_path / "out.csv")
    assert (tmp_path / "out.csv").read_text() == "id,w,1.t\nM1,1.0,5.0\nM2,2.0,NA\n"
    (tmp_path / "badbom.csv").write_text("child,mother\n")
    with pytest.raises(InputError):
        read_bom(tmp_path / "badbom.csv")
