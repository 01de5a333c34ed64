import numpy as np
import pytest

from serieskernel.errors import DataFormatError
from serieskernel.tsdata import (
    Dataset,
    TimeSeries,
    load_jsonl,
    load_ucr_tsv,
    split_forecast,
    write_jsonl,
)

from conftest import DATA


def test_tab_line(tmp_path):
    p = tmp_path / "x.tsv"
    p.write_text("2\t0.5\t0.7\n")
    ds = load_ucr_tsv(p)
    s = ds[0]
    assert np.array_equal(s.timestamps, [0, 1])
    assert np.array_equal(s.values, [[0.5], [0.7]])
    assert ds.labels == ("2",)


def test_comma_line(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,0.1,0.2,0.3\n")
    s = load_ucr_tsv(p)[0]
    assert np.array_equal(s.timestamps, [0, 1, 2])
    assert s.values.shape == (3, 1)


def test_ucr_errors(tmp_path):
    p = tmp_path / "ragged.tsv"
    p.write_text("1\t0.1\t0.2\n2\t0.3\n")
    with pytest.raises(DataFormatError, match=":2:"):
        load_ucr_tsv(p)
    p.write_text("1\t0.1\tabc\n")
    with pytest.raises(DataFormatError, match=":1:"):
        load_ucr_tsv(p)
    p.write_text("")
    with pytest.raises(DataFormatError, match="empty"):
        load_ucr_tsv(p)


def test_italy_train_shape():
    ds = load_ucr_tsv(DATA / "ucr" / "ItalyPowerDemand_TRAIN.tsv")
    assert len(ds) == 67
    assert all(len(s) == 24 for s in ds)
    assert sorted(set(ds.labels)) == ["1", "2"]


def test_jsonl_irregular(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"id":"a","t":[0.0,0.5,2.0],"v":[[1],[2],[3]]}\n')
    ds = load_jsonl(p)
    assert len(ds[0]) == 3 and ds[0].d == 1
    assert ds.labels is None


def test_jsonl_ties_accepted(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"id":"a","t":[1.0,1.0],"v":[[1],[2]]}\n')
    assert len(load_jsonl(p)[0]) == 2


def test_jsonl_errors(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text('{"id":"bad","t":[2.0,1.0],"v":[[1],[2]]}\n')
    with pytest.raises(DataFormatError, match="bad"):
        load_jsonl(p)
    p.write_text('{"id":"a","t":[1.0,2.0],"v":[[1]]}\n')
    with pytest.raises(DataFormatError, match="timestamps"):
        load_jsonl(p)
    p.write_text('{"id":"a","t":[1.0],"v":[[1]]}\n{"id":"b","t":[1.0],"v":[[1, 2]]}\n')
    with pytest.raises(DataFormatError, match="channels"):
        load_jsonl(p)


def test_jsonl_roundtrip(tmp_path, rng):
    series = [TimeSeries(np.sort(rng.uniform(size=4)), rng.normal(size=(4, 2)), f"x{i}") for i in range(3)]
    ds = Dataset(series, ["a", "b", "a"], "rt")
    write_jsonl(ds, tmp_path / "rt.jsonl")
    back = load_jsonl(tmp_path / "rt.jsonl")
    assert back.labels == ("a", "b", "a")
    assert all(a.same_as(b) for a, b in zip(ds, back))


def test_timeseries_invariants():
    with pytest.raises(DataFormatError):
        TimeSeries([0, 1], [[1.0]])
    with pytest.raises(DataFormatError):
        TimeSeries([0, 1], [1.0, np.nan])
    s = TimeSeries([0, 1], [1.0, 2.0])
    assert not s.values.flags.writeable


def test_dataset_rejects_duplicate_ids():
    s = TimeSeries([0.0], [1.0], "a")
    with pytest.raises(DataFormatError):
        Dataset((s, s))


def _grid_ds(n_times, n_series=2):
    t = np.arange(n_times, dtype=float)
    return Dataset(tuple(TimeSeries(t, t * (i + 1), str(i)) for i in range(n_series)))


@pytest.mark.parametrize("n_times,n,train,test", [(31, 9, 22, 9), (2, 1, 1, 1), (96, 48, 48, 48)])
def test_split_forecast(n_times, n, train, test):
    ds = _grid_ds(n_times)
    sp = split_forecast(ds, n)
    s = ds[0]
    assert np.array_equal(sp.train_window(s).timestamps, np.arange(train))
    assert np.array_equal(sp.test_window(s).timestamps, np.arange(train, train + test))


def test_split_too_short():
    ds = _grid_ds(3)
    with pytest.raises(DataFormatError, match="'0'"):
        split_forecast(ds, 3)
