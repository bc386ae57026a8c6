import json
import math

import pytest

from app.models import Regime
from app.schemas.results import ResultMetadata, ResultTable
from app.services.storage_service import StorageService, format_value


@pytest.mark.parametrize(
    "value, expected",
    [
        (0.5, "0.5"),
        (2.27e-8, "2.27e-08"),
        (1e-4, "1e-04"),
        (0.001, "0.001"),
        (78.125, "78.125"),
        (1234567.0, "1234567"),
        (1e20, "100000000000000000000"),
        (0.0, "0"),
        (-3e-5, "-3e-05"),
        (math.nan, "nan"),
        (True, "true"),
        (False, "false"),
        (7, "7"),
        (None, ""),
        (Regime.CONVEX, "convex"),
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def _table() -> ResultTable:
    return ResultTable(
        metadata=ResultMetadata(command="analyze", seed=3, extra={"delta_g": 12.5}),
        columns=["age", "p_out", "regime"],
        rows=[[1, 2.27e-8, Regime.CONVEX], [2, math.nan, Regime.CONCAVE]],
    )


def test_csv_layout():
    text = StorageService("csv").render(_table())
    lines = text.splitlines()
    assert lines[0] == "# command: analyze"
    assert "# seed: 3" in lines
    assert "# delta_g: 12.5" in lines
    data = StorageService.data_rows(text)
    assert data == ["age,p_out,regime", "1,2.27e-08,convex", "2,nan,concave"]


def test_json_layout():
    document = json.loads(StorageService("json").render(_table()))
    assert document["columns"] == ["age", "p_out", "regime"]
    assert document["rows"][1] == [2, None, "concave"]
    assert document["metadata"]["command"] == "analyze"
    assert document["metadata"]["delta_g"] == 12.5


def test_store_creates_directories(tmp_path):
    target = tmp_path / "nested" / "out.csv"
    assert StorageService("csv").store(_table(), target) == target
    assert target.read_text().startswith("# command: analyze")


def test_store_to_stdout(capsys):
    assert StorageService("csv").store(_table(), "-") is None
    assert "age,p_out,regime" in capsys.readouterr().out


def test_rejects_unknown_format():
    with pytest.raises(ValueError):
        StorageService("xlsx")


def test_row_width_is_checked():
    with pytest.raises(ValueError):
        ResultTable(metadata=ResultMetadata(command="x"), columns=["a", "b"], rows=[[1]])


def test_table_column_lookup():
    table = _table()
    assert table.column("age") == [1, 2]
    assert table.column("regime") == [Regime.CONVEX, Regime.CONCAVE]
    with pytest.raises(ValueError):
        table.column("sigma_g_sq")
