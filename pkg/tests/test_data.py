import numpy as np
import pytest

from dbmshield.data import BinaryDataset, format_csv, parse_csv, read_csv, splitdata, write_csv


def test_dataset_rejects_non_binary():
    with pytest.raises(ValueError):
        BinaryDataset([[0, 2]])
    with pytest.raises(ValueError):
        BinaryDataset(np.zeros((3, 0)))


def test_default_column_names():
    assert BinaryDataset([[0, 1, 1]]).column_names == ("V1", "V2", "V3")


def test_csv_round_trip(tmp_path):
    d = BinaryDataset([[0, 1], [1, 1]], ["a", "b"])
    write_csv(d, tmp_path / "d.csv")
    assert read_csv(tmp_path / "d.csv") == d


def test_csv_without_header():
    d = parse_csv("0,1\n1,1\n")
    np.testing.assert_array_equal(d.values, [[0, 1], [1, 1]])


@pytest.mark.parametrize("text", ["a,b\n0,2\n", "a,b\n0,1,1\n", "0,1\n0.5,1\n", ""])
def test_csv_rejects_bad_tokens(text):
    with pytest.raises(ValueError):
        parse_csv(text)


def test_format_csv_header():
    assert format_csv(BinaryDataset([[1, 0]], ["x", "y"])) == "x,y\n1,0\n"


def test_splitdata_sizes_follow_heldout_ratio():
    d = BinaryDataset(np.random.default_rng(0).integers(0, 2, (500, 50)))
    train, test = splitdata(d, 0.2, rng=np.random.default_rng(1))
    assert (train.n_rows, test.n_rows) == (400, 100)


def test_splitdata_is_a_partition():
    d = BinaryDataset(np.random.default_rng(3).integers(0, 2, (37, 6)))
    train, test = splitdata(d, 0.3, rng=np.random.default_rng(2))
    pooled = BinaryDataset(np.vstack([train.values, test.values]))
    np.testing.assert_array_equal(pooled.sorted_rows(), d.sorted_rows())


def test_splitdata_deterministic():
    d = BinaryDataset(np.random.default_rng(3).integers(0, 2, (50, 4)))
    a = splitdata(d, 0.2, rng=np.random.default_rng(7))
    b = splitdata(d, 0.2, rng=np.random.default_rng(7))
    assert a[0] == b[0] and a[1] == b[1]


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.5, 1.5])
def test_splitdata_rejects_ratio(ratio):
    with pytest.raises(ValueError):
        splitdata(BinaryDataset(np.zeros((10, 2))), ratio)
