import numpy as np
import pytest

from jumplev.ingest import IngestError, ingest_ticks


def write(path, rows, header="time,logprice"):
    path.write_text(header + "\n" + "".join(f"{t},{y}\n" for t, y in rows))
    return path


def test_three_row_file(tmp_path):
    rep = ingest_ticks(write(tmp_path / "a.csv", [(0, 4.6), (0.5, 4.61), (1, 4.605)]), min_ticks=3)
    assert rep.ticks.n + 1 == 3
    assert not rep.rescaled
    np.testing.assert_array_equal(rep.ticks.y, [4.6, 4.61, 4.605])


def test_unsorted_file_names_row(tmp_path):
    path = write(tmp_path / "b.csv", [(0, 1), (0.4, 1), (0.3, 1), (1, 1)])
    with pytest.raises(IngestError, match=r"b\.csv:4"):
        ingest_ticks(path, min_ticks=3)


def test_non_numeric_field_names_row(tmp_path):
    path = write(tmp_path / "c.csv", [(0, 1), (0.5, "abc"), (1, 1)])
    with pytest.raises(IngestError, match=r"c\.csv:3"):
        ingest_ticks(path, min_ticks=3)


def test_bad_header(tmp_path):
    with pytest.raises(IngestError, match="header"):
        ingest_ticks(write(tmp_path / "d.csv", [(0, 1)] * 5, header="t,p"), min_ticks=3)


def test_raw_seconds_rescaled(tmp_path):
    t = np.arange(0, 23401, 100.0) + 34200
    rep = ingest_ticks(write(tmp_path / "e.csv", zip(t, np.zeros(t.size))), min_ticks=3)
    assert rep.rescaled and rep.offset == 34200 and rep.span == 23400
    assert rep.ticks.times[0] == 0 and rep.ticks.times[-1] == 1
    np.testing.assert_allclose(rep.ticks.times, (t - 34200) / 23400)


def test_duplicate_times_keep_last(tmp_path):
    rows = [(0, 1.0), (0.5, 2.0), (0.5, 3.0), (0.5, 4.0), (1, 5.0)]
    rep = ingest_ticks(write(tmp_path / "f.csv", rows), min_ticks=3)
    assert rep.duplicates == 2
    np.testing.assert_array_equal(rep.ticks.y, [1.0, 4.0, 5.0])


def test_zero_returns_optionally_dropped(tmp_path):
    rows = [(0, 1.0), (0.25, 1.0), (0.5, 2.0), (0.75, 2.0), (1, 3.0)]
    path = write(tmp_path / "g.csv", rows)
    assert ingest_ticks(path, min_ticks=3).ticks.n == 4
    rep = ingest_ticks(path, min_ticks=3, drop_zero_returns=True)
    assert rep.zero_returns_dropped == 2
    np.testing.assert_array_equal(rep.ticks.y, [1.0, 2.0, 3.0])


def test_default_floor_is_one_hundred(tmp_path):
    rows = [(i / 98, 0.0) for i in range(99)]
    with pytest.raises(IngestError, match="at least 100"):
        ingest_ticks(write(tmp_path / "h.csv", rows))
    rows = [(i / 99, 0.0) for i in range(100)]
    assert ingest_ticks(write(tmp_path / "i.csv", rows)).ticks.n == 99


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest_ticks(tmp_path / "nope.csv")
