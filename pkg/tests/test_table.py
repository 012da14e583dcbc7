import json
import math

import numpy as np
import pytest

from kerrsim.table import (
    ResultTable,
    TableError,
    format_value,
    parse_json_value,
    table_from_json_dict,
)


def small_table(**kw):
    defaults = dict(
        columns=("x", "y"),
        rows=((0.0, 1.0), (0.5, 2.0)),
        metadata={"tool_version": "0.1.0"},
    )
    defaults.update(kw)
    return ResultTable(**defaults)


def test_cell_format_round_trips_doubles():
    for x in (0.1, 1.0 / 3.0, 1e-300, -7.25e17, 0.0):
        assert float(format_value(x)) == x


def test_cell_format_uses_inf_token():
    assert format_value(math.inf) == "inf"
    assert format_value(-math.inf) == "-inf"


def test_rows_are_normalized_to_float_tuples():
    t = ResultTable(columns=("a",), rows=[[np.float64(2.5)], (3,)])
    assert t.rows == ((2.5,), (3.0,))
    assert isinstance(t.rows[0][0], float)


def test_ragged_rows_rejected():
    with pytest.raises(TableError, match="row 1 has 3"):
        ResultTable(columns=("a", "b"), rows=((1.0, 2.0), (1.0, 2.0, 3.0)))


def test_duplicate_and_empty_columns_rejected():
    with pytest.raises(TableError, match="duplicate"):
        ResultTable(columns=("a", "a"), rows=())
    with pytest.raises(TableError, match="at least one column"):
        ResultTable(columns=(), rows=())


def test_nan_aborts_with_column_and_row():
    with pytest.raises(TableError, match="NaN in column 'y' at row 1"):
        ResultTable(columns=("x", "y"), rows=((0.0, 1.0), (1.0, math.nan)))


def test_inf_needs_whitelist():
    with pytest.raises(TableError, match="infinity in column 'y' at row 0"):
        ResultTable(columns=("x", "y"), rows=((0.0, math.inf),))
    t = ResultTable(columns=("x", "y"), rows=((0.0, math.inf),),
                    allow_inf=("y",))
    assert t.rows[0][1] == math.inf


def test_allow_inf_must_name_real_columns():
    with pytest.raises(TableError, match="unknown columns"):
        ResultTable(columns=("x",), rows=(), allow_inf=("ratio",))


def test_column_accessor():
    t = small_table()
    assert t.column("y") == (1.0, 2.0)
    with pytest.raises(KeyError):
        t.column("z")


def test_csv_shape_and_header():
    text = small_table().to_csv()
    lines = text.splitlines()
    assert lines[0] == "x,y"
    assert len(lines) == 3
    assert text.endswith("\n")


def test_csv_inf_sentinel_literal():
    t = ResultTable(columns=("v", "ratio"), rows=((0.1, math.inf),),
                    allow_inf=("ratio",))
    assert t.to_csv().splitlines()[1] == "0.10000000000000001,inf"


def test_csv_deterministic():
    a = small_table(metadata={"wall_time_s": 0.1})
    b = small_table(metadata={"wall_time_s": 99.9})
    # metadata differences (wall time) must not leak into the file
    assert a.to_csv() == b.to_csv()


def test_json_round_trip_with_inf():
    t = ResultTable(columns=("v", "ratio"),
                    rows=((0.0, 1.5), (0.1, math.inf)),
                    metadata={"n": 2, "note": "x"},
                    allow_inf=("ratio",))
    doc = json.loads(t.to_json())
    assert doc["rows"][1][1] == "inf"
    back = table_from_json_dict(doc)
    assert back.rows == t.rows
    assert back.metadata["note"] == "x"


def test_json_value_parser():
    assert parse_json_value("inf") == math.inf
    assert parse_json_value("-inf") == -math.inf
    assert parse_json_value(0.25) == 0.25


def test_metadata_numpy_scalars_serialize():
    t = small_table(metadata={"f_max": np.float64(0.5), "n": np.int64(3)})
    doc = t.to_json_dict()
    assert doc["metadata"]["f_max"] == 0.5
    assert doc["metadata"]["n"] == 3.0


def test_metadata_garbage_rejected_at_export():
    t = small_table(metadata={"bad": object()})
    with pytest.raises(TableError, match="not serializable"):
        t.to_json()


def test_write_formats(tmp_path):
    t = small_table()
    csv_path = tmp_path / "out.csv"
    t.write(csv_path, "csv")
    assert csv_path.read_text().startswith("x,y\n")
    json_path = tmp_path / "out.json"
    t.write(json_path, "json")
    assert json.loads(json_path.read_text())["columns"] == ["x", "y"]
    with pytest.raises(TableError, match="unknown output format"):
        t.write(tmp_path / "out.xml", "xml")
