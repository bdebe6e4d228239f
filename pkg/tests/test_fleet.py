import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shipcoat.fleet import (HEADER, CompartmentHistory, DataError, FleetDataset,
                            InspectionRecord, defect_report_histogram, observed_interval,
                            parse_inspection_csv, split_by_time, write_inspection_csv)

HEAD = ",".join(HEADER) + "\n"


def test_minimal_file():
    ds = parse_inspection_csv((HEAD + "S1,C1,12,3\n").encode())
    assert ds.keys == [("S1", "C1")]
    h = ds[("S1", "C1")]
    assert h.times.tolist() == [12.0] and h.counts.tolist() == [3]
    assert h.starts.tolist() == [0.0]


def test_empty_data_section():
    ds = parse_inspection_csv(io.StringIO("# produced elsewhere\n" + HEAD))
    assert len(ds) == 0 and ds.n_records == 0


def test_out_of_order_times_name_the_compartment():
    text = HEAD + "S1,C7,24,0\nS1,C7,12,1\n"
    with pytest.raises(DataError, match="C7"):
        parse_inspection_csv(text.encode())


def test_duplicate_time_rejected():
    with pytest.raises(DataError, match="duplicate"):
        parse_inspection_csv((HEAD + "S1,C1,12,0\nS1,C1,12,2\n").encode())


@pytest.mark.parametrize("row,where", [
    ("S1,C1,12,-1", "line 2"),
    ("S1,C1,abc,1", "line 2"),
    ("S1,C1,12,1.5", "line 2"),
    ("S1,,12,1", "line 2"),
    ("S1,C1,12", "line 2"),
    ("S1,C1,-3,1", "line 2"),
])
def test_bad_rows_report_line(row, where):
    with pytest.raises(DataError, match=where):
        parse_inspection_csv((HEAD + row + "\n").encode())


def test_header_required():
    with pytest.raises(DataError, match="header"):
        parse_inspection_csv(b"S1,C1,12,3\n")
    with pytest.raises(DataError):
        parse_inspection_csv(b"")


def test_comments_and_blank_lines_skipped(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("# one\n\n" + HEAD + "# two\nS2,C1,6,0\n\nS1,C1,3.5,2\n", encoding="utf-8")
    ds = parse_inspection_csv(p)
    assert ds.keys == [("S1", "C1"), ("S2", "C1")]
    assert ds[("S1", "C1")].times.tolist() == [3.5]


def test_inspection_at_launch_rejected():
    with pytest.raises(DataError):
        CompartmentHistory("S1", "C1", [0.0, 12.0], [0, 1])


def test_history_arrays_read_only():
    h = CompartmentHistory("S1", "C1", [6, 12], [1, 0])
    with pytest.raises(ValueError):
        h.times[0] = 3.0


def test_dataset_rejects_duplicate_compartments():
    h = CompartmentHistory("S1", "C1", [6], [1])
    with pytest.raises(DataError):
        FleetDataset((h, CompartmentHistory("S1", "C1", [12], [0])))


def test_record_validation():
    with pytest.raises(DataError):
        InspectionRecord("S1", "C1", float("inf"), 0)
    with pytest.raises(DataError):
        InspectionRecord("S1", "C1", 3.0, -2)


def test_split_by_time():
    ds = FleetDataset((CompartmentHistory("S1", "C1", [12, 24, 36, 48], [1, 0, 2, 1]),
                       CompartmentHistory("S1", "C2", [40, 50], [0, 3]),
                       CompartmentHistory("S2", "C1", [6], [1])))
    train, test = split_by_time(ds, 30)
    assert train.keys == [("S1", "C1"), ("S2", "C1")]
    assert train[("S1", "C1")].times.tolist() == [12, 24]
    t = test[("S1", "C1")]
    assert t.start == 24 and t.times.tolist() == [36, 48] and t.starts.tolist() == [24, 36]
    assert test[("S1", "C2")].start == 0.0
    assert ("S2", "C1") not in test


def test_histogram_and_observed_interval():
    ds = FleetDataset((CompartmentHistory("S1", "C1", [12, 24, 36], [1, 0, 2]),
                       CompartmentHistory("S1", "C2", [30, 60], [0, 0]),
                       CompartmentHistory("S1", "C3", [30, 60], [0, 3])))
    assert defect_report_histogram(ds) == {0: 1, 3: 2}
    assert observed_interval(ds[("S1", "C2")]) == 30.0
    assert observed_interval(CompartmentHistory("S1", "C9", [], [])) is None


ident = st.text("ABCDEFGHJKLMNPQRSTUVWXYZ0123456789_-", min_size=1, max_size=5)


@st.composite
def datasets(draw):
    keys = draw(st.lists(st.tuples(ident, ident), unique=True, max_size=6))
    hs = []
    for ship, comp in keys:
        n = draw(st.integers(0, 6))
        gaps = draw(st.lists(st.sampled_from([0.5, 1.0, 3.0, 12.0, 7.25]), min_size=n, max_size=n))
        counts = draw(st.lists(st.integers(0, 40), min_size=n, max_size=n))
        if n:
            hs.append(CompartmentHistory(ship, comp, np.cumsum(gaps), counts))
    return FleetDataset(tuple(hs))


@given(datasets())
def test_csv_round_trip(ds):
    text = write_inspection_csv(ds, comments=["generated"])
    back = parse_inspection_csv(text.encode())
    assert back.keys == ds.keys
    for h in ds:
        assert back[h.key] == h
    assert write_inspection_csv(back, comments=["generated"]) == text
