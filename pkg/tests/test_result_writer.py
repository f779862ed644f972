"""
Tests for CSV and JSON result files
"""

import pytest

from api.models import ResultTable
from services.result_writer import emit, load_table, render


@pytest.fixture
def table() -> ResultTable:
    return ResultTable(
        columns=["t_ms", "P_C3"],
        rows=[[0.0, 0.0], [1.0, 0.1 + 0.2], [2.0, 1.0 / 3.0]],
        metadata={"study": "S1-cdf-by-cluster-size", "solver_eps": 1e-9, "config.C": "3"},
    )


def test_csv_layout(table):
    text = render(table, "csv")
    assert text.splitlines() == [
        "# study=S1-cdf-by-cluster-size",
        "# solver_eps=1e-09",
        "# config.C=3",
        "t_ms,P_C3",
        "0,0",
        "1,0.3",
        "2,0.333333333333",
    ]


def test_single_row_csv():
    single = ResultTable(columns=["x"], rows=[[1.5]], metadata={"study": "S5-statespace-report"})
    assert render(single, "csv") == "# study=S5-statespace-report\nx\n1.5\n"


def test_emit_is_byte_identical(tmp_path, table):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    emit(table, "csv", first)
    emit(table, "csv", second)
    assert first.read_bytes() == second.read_bytes()
    assert b"\r\n" not in first.read_bytes()


def test_json_round_trip(tmp_path, table):
    path = tmp_path / "table.json"
    emit(table, "json", path)
    assert load_table(path) == table


def test_csv_load(tmp_path, table):
    path = tmp_path / "table.csv"
    emit(table, "csv", path)
    loaded = load_table(path)
    assert loaded.columns == table.columns
    assert loaded.metadata["config.C"] == "3"
    assert loaded.rows[2][1] == pytest.approx(1.0 / 3.0, rel=1e-11)


def test_emit_to_stdout(capsys, table):
    emit(table, "json")
    assert '"columns"' in capsys.readouterr().out


def test_unwritable_path(tmp_path, table):
    with pytest.raises(OSError):
        emit(table, "csv", tmp_path / "missing" / "table.csv")


def test_ragged_table_rejected():
    with pytest.raises(ValueError):
        ResultTable(columns=["a", "b"], rows=[[1.0]])
