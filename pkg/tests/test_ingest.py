import io

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ventpress.data_model import Dataset
from ventpress.ingest import HEADER, ParseError, compute_stats, parse_csv, write_csv
from ventpress.lung_sim import SimConfig, generate_dataset

from conftest import make_breath

ROW1 = b"1,1,20,50,0.000000,0.083334,0,5.837492\n"
HEAD = ",".join(HEADER).encode() + b"\n"


def test_parse_table_one_row():
    d = parse_csv(HEAD + ROW1)
    assert d.has_pressure and len(d) == 1
    b = d.breaths[0]
    assert (b.settings.r, b.settings.c) == (20.0, 50.0)
    assert b.u_in.tolist() == [0.083334]
    assert b.pressure.tolist() == [5.837492]
    assert b.time_s.tolist() == [0.0]


def test_parse_without_pressure():
    d = parse_csv(b"id,breath_id,R,C,time_step,u_in,u_out\n1,1,20,50,0,0.08,0\n")
    assert not d.has_pressure
    assert d.breaths[0].pressure is None
    assert d.breaths[0].steps[0].pressure is None


def test_parse_header_only():
    d = parse_csv(HEAD)
    assert len(d) == 0 and d.has_pressure


def test_parse_from_path_and_file(tmp_path):
    path = tmp_path / "x.csv"
    path.write_bytes(HEAD + ROW1)
    assert parse_csv(path) == parse_csv(str(path)) == parse_csv(io.BytesIO(HEAD + ROW1))


def test_missing_column_is_named():
    with pytest.raises(ParseError, match="'u_out'"):
        parse_csv(b"id,breath_id,R,C,time_step,u_in\n1,1,20,50,0,1\n")


def test_non_numeric_cell_reports_line():
    bad = HEAD + ROW1 + b"2,1,20,50,0.03,abc,0,5.9\n"
    with pytest.raises(ParseError, match="line 3.*'abc'.*u_in"):
        parse_csv(bad)


def test_non_contiguous_breath_is_fatal():
    rows = HEAD + ROW1 + b"2,2,20,50,0,1,0,5\n3,1,20,50,0.03,1,0,5\n"
    with pytest.raises(ParseError, match="breath_id 1 is not contiguous"):
        parse_csv(rows)


def test_file_order_preserved_within_breath(table_one_bytes):
    b = parse_csv(table_one_bytes).breaths[0]
    assert b.time_s.tolist() == [0.0, 0.033652, 0.067514, 0.011542, 0.135756]


def test_write_empty_and_counting():
    assert write_csv(Dataset((), True)) == HEAD
    b = make_breath([0, 0.1], [1, 2], [0, 1], pressure=[5.0, 6.0], breath_id=7)
    lines = write_csv(Dataset((b,), True)).decode().splitlines()
    assert len(lines) == 3
    assert [ln.split(",")[0] for ln in lines[1:]] == ["1", "2"]


def test_roundtrip_synthetic():
    d = generate_dataset(5, SimConfig(seed=4))
    back = parse_csv(write_csv(d))
    assert back == d
    for a, b in zip(d, back):
        assert a.pressure.tobytes() == b.pressure.tobytes()


awkward = st.floats(0, 100, allow_nan=False).filter(lambda x: x == 0 or abs(x) > 1e-300)


@settings(max_examples=50, deadline=None)
@given(st.lists(awkward, min_size=1, max_size=6), st.floats(-1e4, 1e4, allow_nan=False))
def test_roundtrip_arbitrary_floats(u_in, p0):
    n = len(u_in)
    b = make_breath(np.arange(n) * 0.0337, u_in, [0] * n,
                    pressure=p0 + np.arange(n) / 3.0, r=5.0, c=10.0)
    d = Dataset((b,), True)
    assert parse_csv(write_csv(d)) == d


def test_stats_counting():
    n = 80
    b = make_breath(np.arange(n) * 0.035, np.ones(n), np.zeros(n), pressure=np.ones(n))
    s = compute_stats(Dataset((b,), True))
    assert s.u_out_counts == {0: 80, 1: 0}
    assert s.n_breaths == 1


def test_stats_median_even_count():
    b1 = make_breath([0, 0.1, 0.2], [1, 1, 1], [0, 0, 1], pressure=[1.0, 2.0, 99.0])
    b2 = make_breath([0, 0.1], [1, 1], [0, 0], pressure=[3.0, 4.0], breath_id=2)
    s = compute_stats(Dataset((b1, b2), True))
    assert s.median_inspiratory_pressure == 2.5
    assert s.pip == 99.0


def test_stats_empty_and_pressureless():
    s = compute_stats(Dataset((), True))
    assert s.n_breaths == 0 and s.pip is None and s.max_breath_duration_s is None
    d = parse_csv(b"id,breath_id,R,C,time_step,u_in,u_out\n1,1,20,50,0,0.08,0\n")
    s = compute_stats(d)
    assert s.pip is None and s.median_inspiratory_pressure is None
    assert s.max_uout_zero_time_s == 0.0


def pandas_stats(csv_bytes):
    """Independent oracle: the same statistics straight from a DataFrame."""
    df = pd.read_csv(io.BytesIO(csv_bytes), float_precision="round_trip")
    insp = df[df.u_out == 0]
    return {
        "n_breaths": int(df.breath_id.nunique()),
        "r_counts": {float(k): int(v) for k, v in df.R.value_counts().items()},
        "c_counts": {float(k): int(v) for k, v in df.C.value_counts().items()},
        "u_out_counts": {int(k): int(v) for k, v in df.u_out.value_counts().items()},
        "rc_breath_counts": {(float(r), float(c)): int(v) for (r, c), v in
                             df.groupby("breath_id")[["R", "C"]].first()
                             .value_counts().items()},
        "pip": float(df.pressure.max()),
        "median_inspiratory_pressure": float(insp.pressure.median()),
        "max_breath_duration_s": float(df.groupby("breath_id").time_step.last().max()),
        "max_uout_zero_time_s": float(insp.time_step.max()),
    }


def test_stats_match_pandas_oracle():
    d = generate_dataset(40, SimConfig(seed=9))
    raw = write_csv(d)
    expected = pandas_stats(raw)
    got = compute_stats(parse_csv(raw))
    for key, value in expected.items():
        assert getattr(got, key) == value, key


def test_stats_row_identities_and_permutation_invariance():
    d = generate_dataset(30, SimConfig(seed=2))
    s = compute_stats(d)
    total = d.n_rows
    assert sum(s.r_counts.values()) == sum(s.c_counts.values()) == \
        sum(s.u_out_counts.values()) == total
    assert s.pip >= s.median_inspiratory_pressure
    shuffled = Dataset(tuple(reversed(d.breaths)), True)
    assert compute_stats(shuffled) == s


def test_stats_json_field_names():
    s = compute_stats(generate_dataset(3, SimConfig(seed=1)))
    doc = s.to_dict()
    for name in ("n_breaths", "r_counts", "c_counts", "rc_breath_counts", "u_out_counts",
                 "pip", "median_inspiratory_pressure", "max_breath_duration_s",
                 "max_uout_zero_time_s"):
        assert name in doc
    assert f"pip: {s.pip!r}" in s.to_text()


def test_competition_file_counts_are_consistent():
    # published u_out, R and C counts all sum to 75,450 breaths x 80 steps
    assert 3745032 + 2290968 == 75450 * 80 == 6036000
    assert 2410080 + 1988800 + 1637120 == 6036000
    assert 2244720 + 1971680 + 1819600 == 6036000
