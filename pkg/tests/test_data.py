import io

import numpy as np
import pytest

from bnbench.data import (
    MISSING,
    MISSING_LABEL,
    DataError,
    Dataset,
    Variable,
    counts,
    dataset_from_columns,
    discretize_equal_frequency,
    dump_csv,
    impute_missing_state,
    loads_csv,
)


def test_load_two_binary_columns():
    d = loads_csv("a,b\nyes,no\nno,no\nyes,yes\n")
    assert d.arities == [2, 2]
    assert d.variables[0].states == ("no", "yes")  # sorted lexicographically


def test_single_missing_cell():
    d = loads_csv("a,b\nyes,\nno,x\nyes,y\n", missing_token="")
    assert d.missing_count() == 1
    assert d.rows[0, 1] == MISSING


def test_shape_17_by_300():
    rng = np.random.default_rng(0)
    header = ",".join(f"v{i}" for i in range(17))
    lines = [header]
    for _ in range(300):
        lines.append(",".join(str(rng.integers(0, 3)) for _ in range(17)))
    d = loads_csv("\n".join(lines))
    assert (d.n, d.m) == (300, 17)


def test_ragged_row_rejected():
    with pytest.raises(DataError):
        loads_csv("a,b\n1,2\n3\n")


def test_empty_file_rejected():
    with pytest.raises(DataError):
        loads_csv("")
    with pytest.raises(DataError):
        loads_csv("a,b\n")


def test_arity_cap():
    rows = "\n".join(f"t{i},x" if i % 2 else f"t{i},y" for i in range(40))
    with pytest.raises(DataError):
        loads_csv("a,b\n" + rows)


def test_duplicate_header_rejected():
    with pytest.raises(DataError):
        loads_csv("a,a\n1,2\n3,4\n")


class TestImpute:
    def test_adds_state_and_fills(self):
        d = dataset_from_columns({"a": ["yes", "", "no", "", ""]})
        out = impute_missing_state(d)
        assert out.variables[0].states == ("no", "yes", MISSING_LABEL)
        assert (out.rows[:, 0] == 2).sum() == 3
        assert out.is_complete()

    def test_identity_on_complete(self):
        d = dataset_from_columns({"a": ["x", "y"], "b": ["1", "0"]})
        assert impute_missing_state(d) == d

    def test_no_missing_after(self):
        d = dataset_from_columns({"a": ["x", "", "y"], "b": ["0", "1", ""]})
        assert impute_missing_state(d).missing_count() == 0

    def test_non_missing_cells_unchanged(self):
        d = dataset_from_columns({"a": ["x", "", "y"], "b": ["0", "1", "1"]})
        out = impute_missing_state(d)
        keep = d.rows != MISSING
        assert np.array_equal(out.rows[keep], d.rows[keep])
        assert [v.arity - o.arity for v, o in zip(out.variables, d.variables)] == [1, 0]


class TestDiscretize:
    def test_even_split(self):
        var, idx = discretize_equal_frequency(range(1, 11), 2)
        assert var.arity == 2
        assert np.bincount(idx).tolist() == [5, 5]

    def test_constant_vector_rejected(self):
        with pytest.raises(DataError):
            discretize_equal_frequency([3.0] * 10, 2)

    def test_three_way(self):
        _, idx = discretize_equal_frequency(range(1, 10), 3)
        assert np.bincount(idx).tolist() == [3, 3, 3]

    def test_half_open_bins(self):
        # value equal to a quantile edge lands in the upper bin
        _, idx = discretize_equal_frequency([1, 1, 2, 2], 2)
        assert idx.tolist() == [0, 0, 1, 1]


class TestCounts:
    def test_single_binary(self):
        d = dataset_from_columns({"a": ["x", "x", "x", "y"]})
        t = counts(d, [0])
        assert t.counts.tolist() == [3, 1]
        assert t.n_used == 4

    def test_empty_var_list(self):
        d = dataset_from_columns({"a": ["x", "y", "x"]})
        t = counts(d, [])
        assert int(t.counts) == 3

    def test_uniform_pair(self):
        rng = np.random.default_rng(77)
        rows = rng.integers(0, 2, size=(1000, 2)).astype(np.int32)
        d = Dataset([Variable("a", ("0", "1")), Variable("b", ("0", "1"))], rows)
        t = counts(d, [0, 1])
        assert t.counts.shape == (2, 2)
        assert np.all(np.abs(t.counts - 250) <= 50)

    def test_listwise_deletion(self):
        d = dataset_from_columns({"a": ["x", "", "y"], "b": ["0", "1", "1"]})
        t = counts(d, [0, 1])
        assert t.n_used == 2
        assert t.counts.sum() == 2

    def test_marginalization_consistency(self):
        rng = np.random.default_rng(3)
        rows = rng.integers(0, 3, size=(200, 2)).astype(np.int32)
        d = Dataset(
            [Variable("a", ("0", "1", "2")), Variable("b", ("0", "1", "2"))], rows
        )
        joint = counts(d, [0, 1]).counts
        marg = counts(d, [0]).counts
        assert np.array_equal(joint.sum(axis=1), marg)

    def test_duplicate_columns_rejected(self):
        d = dataset_from_columns({"a": ["x", "y"]})
        with pytest.raises(DataError):
            counts(d, [0, 0])


def test_csv_round_trip():
    d = dataset_from_columns(
        {"a": ["x", "y", "x"], "b": ["0", "1", "1"], "c": ["u,v", "w", "w"]}
    )
    buf = io.StringIO()
    dump_csv(d, buf)
    back = loads_csv(buf.getvalue())
    assert back == d


def test_round_trip_preserves_missing():
    d = dataset_from_columns({"a": ["x", "", "y"], "b": ["0", "1", "1"]})
    buf = io.StringIO()
    dump_csv(d, buf, missing_token="")
    back = loads_csv(buf.getvalue(), missing_token="")
    assert back == d


def test_prefix_and_columns():
    d = dataset_from_columns({"a": ["x", "y", "x"], "b": ["0", "1", "1"]})
    assert d.prefix(2).n == 2
    flipped = d.select_columns([1, 0])
    assert flipped.names == ["b", "a"]
    with pytest.raises(DataError):
        d.prefix(0)


def test_variable_validation():
    with pytest.raises(DataError):
        Variable("a", ("only",))
    with pytest.raises(DataError):
        Variable("a", ("x", "x"))
