import io
import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridhaul._files import FileFormatError
from gridhaul.analytics import ViolationBand
from gridhaul.engine import StepRecord, SweepSample
from gridhaul.export import (
    STEP_COLUMNS,
    export_geojson,
    export_sweep,
    export_voltage_table,
    read_geojson,
    read_step_records,
    read_sweep,
    step_records_csv,
    write_geojson,
)
from gridhaul.timeseries import parse_time, read_series, write_series

T0 = datetime(2020, 7, 1, tzinfo=timezone.utc)


def test_load_series_interpolates(tmp_path):
    p = tmp_path / "loads.csv"
    write_series(p, "load", [(T0, 3, 10.0, 2.0), (T0 + timedelta(hours=1), 3, 20.0, 4.0)])
    s = read_series(p, "load")
    assert s.at(T0 + timedelta(minutes=15)) == {3: (12.5, 2.5)}


def test_generation_series_has_no_q(tmp_path):
    p = tmp_path / "wind.csv"
    p.write_text("timestamp,bus_id,p_mw\n2020-07-01T00:00:00,4,7.5\n2020-07-01T01:00:00,4,9.5\n")
    assert read_series(p, "generation").at(T0) == {4: (7.5, 0.0)}


def test_naive_and_utc_times_agree():
    assert parse_time("2020-07-01T00:00:00") == parse_time("2020-07-01T00:00:00Z")


@pytest.mark.parametrize(
    "body, where",
    [
        ("timestamp,bus_id,p_mw,q_mvar\n2020-07-01T00:00:00,1,1,1\nyesterday,1,1,1\n", ":3: timestamp"),
        ("timestamp,bus_id,p_mw,q_mvar\n2020-07-01T00:00:00,x,1,1\n", ":2: bus_id"),
        ("timestamp,bus_id,p_mw,q_mvar\n2020-07-01T00:00:00,1,abc,1\n", ":2: p_mw"),
        ("timestamp,bus_id,p_mw\n2020-07-01T00:00:00,1,1\n", ":1: missing column"),
    ],
)
def test_series_errors_point_at_line(tmp_path, body, where):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(FileFormatError, match=where):
        read_series(p, "load")


def test_uncovered_buses(tmp_path, data_dir):
    s = read_series(data_dir / "loads30.csv", "load")
    assert s.uncovered(T0, T0 + timedelta(hours=48)) == []
    assert s.uncovered(T0, T0 + timedelta(days=30))


def record(i, **kw):
    base = dict(timestamp=T0 + timedelta(minutes=15 * i), n_charging=i, n_idle=1, n_moving=2 * i, n_departed=i,
                converged=i % 2 == 0, n_violations=3 * i)
    base.update(kw)
    return StepRecord(**base)


def test_empty_run_is_header_only():
    assert step_records_csv([]) == ",".join(STEP_COLUMNS) + "\n"


def test_three_steps_four_lines():
    assert len(step_records_csv([record(i) for i in range(3)]).splitlines()) == 4


@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 10**6), st.booleans()), max_size=30))
def test_step_records_round_trip(rows):
    recs = [record(i, n_charging=a, n_violations=b, converged=c) for i, (a, b, c) in enumerate(rows)]
    again = read_step_records(io.StringIO(step_records_csv(recs)))
    key = lambda r: (r.timestamp, r.n_charging, r.n_idle, r.n_moving, r.n_departed, r.converged, r.n_violations)
    assert [key(r) for r in again] == [key(r) for r in recs]


def test_step_records_bad_row(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(",".join(STEP_COLUMNS) + "\n2020-07-01T00:15:00,1,0,0,0,maybe,0\n")
    with pytest.raises(FileFormatError, match=":2:"):
        read_step_records(p)


def test_sweep_round_trip(tmp_path):
    samples = [SweepSample("f", 5, 20, 1234567890123, 7, True), SweepSample("f", 50, 20, 42, 0, False)]
    p = tmp_path / "sweep.csv"
    export_sweep(samples, p)
    assert read_sweep(p) == samples


def test_geojson_single_bus():
    fc = export_geojson({1: 0.93}, {1: (30.27, -97.74)})
    (f,) = fc["features"]
    assert f["geometry"]["coordinates"] == [-97.74, 30.27]
    assert f["properties"] == {"bus_id": 1, "v_pu": 0.93, "violating": True}


def test_geojson_without_coords():
    fc = export_geojson({1: 1.0, 2: 1.0}, {})
    assert fc["features"] == [] and fc["metadata"]["omitted_without_coords"] == 2


def test_geojson_collapsed():
    fc = export_geojson({b: 0.01 for b in range(5)}, {b: (30.0, -97.0 + b) for b in range(5)})
    assert all(f["properties"]["v_pu"] == 0.01 and f["properties"]["violating"] for f in fc["features"])


def test_geojson_custom_band_and_round_trip(tmp_path):
    fc = export_geojson({1: 0.96}, {1: (30.0, -97.0)}, ViolationBand(0.97, 1.03), {"step": 4})
    assert fc["features"][0]["properties"]["violating"]
    p = tmp_path / "v.geojson"
    write_geojson(fc, p)
    assert read_geojson(p) == fc


def test_geojson_rejects_other_documents(tmp_path):
    p = tmp_path / "x.geojson"
    p.write_text(json.dumps({"type": "Feature"}))
    with pytest.raises(FileFormatError):
        read_geojson(p)


def test_voltage_table_full_precision():
    buf = io.StringIO()
    export_voltage_table([1, 2], [1.0, 0.9949361530051241], [0.0, -0.1], buf)
    assert buf.getvalue().splitlines()[2] == "2,0.9949361530051241,-0.1"
