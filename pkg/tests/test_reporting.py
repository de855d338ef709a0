import json
import math

import pandas as pd
import pytest

from app.core.errors import ParameterError
from app.services.experiments import ExperimentResult
from app.services.reporting import (
    render,
    result_document,
    schema_tag,
    side_path,
    table_to_csv,
    with_exact_columns,
    write_result,
)
from app.services.visualizer import HoleDecayPlotter


@pytest.fixture
def result():
    table = pd.DataFrame({
        "k": [5, 10],
        "adjusted": [0.9012345678901, math.nan],
        "n": [3, 4],
    })
    holes = pd.DataFrame({"k": [0, 1, 2], "holes": [4.5, 4.0, 0.0], "analytic_holes": [4.5, 4.0, 3.5]})
    return ExperimentResult(
        command="twostate",
        config={"seed": 1, "ks": [5, 10]},
        table=table,
        extras={"delta": 8.0 / 9.0, "missing": math.nan},
        side_tables={"holes": holes},
    )


def test_exact_columns():
    """Test kolom _exact hanya untuk kolom float"""
    table = pd.DataFrame({"k": [1], "x": [0.1]})
    out = with_exact_columns(table)
    assert list(out.columns) == ["k", "x", "x_exact"]
    assert out["x_exact"].iloc[0] == "0.1"


def test_csv_format(result):
    """Test CSV: header, 6 digit signifikan, NaN, repr exact"""
    text = table_to_csv(result.table)
    lines = text.splitlines()
    assert lines[0] == "k,adjusted,n,adjusted_exact"
    assert lines[1] == "5,0.901235,3,0.9012345678901"
    assert lines[2] == "10,NaN,4,nan"
    assert text.endswith("\n")
    assert "\r" not in text


def test_json_document(result):
    """Test dokumen JSON: schema, config, NaN menjadi null"""
    document = json.loads(render(result, "json"))
    assert document["schema"] == "perfectsim.twostate/v1"
    assert document["config"] == {"seed": 1, "ks": [5, 10]}
    assert document["rows"][0]["adjusted"] == 0.9012345678901
    assert document["rows"][1]["adjusted"] is None
    assert document["extras"]["missing"] is None
    assert result_document(result)["rows"][0]["k"] == 5


def test_render_invalid_format(result):
    """Test format selain csv/json ditolak"""
    with pytest.raises(ParameterError):
        render(result, "xml")


def test_schema_tag():
    """Test tag schema per perintah"""
    assert schema_tag("calibrate") == "perfectsim.calibrate/v1"


def test_write_result_with_side_tables(result, tmp_path):
    """Test penulisan tabel utama dan tabel samping"""
    out = tmp_path / "nested" / "table.csv"
    written = write_result(result, str(out), "csv")
    assert written == [out, tmp_path / "nested" / "table_holes.csv"]
    assert out.read_text().startswith("k,adjusted,n")
    assert written[1].read_text().splitlines()[0] == "k,holes,analytic_holes,holes_exact,analytic_holes_exact"


def test_write_result_json_side_schema(result, tmp_path):
    """Test tabel samping JSON punya schema sendiri"""
    out = tmp_path / "table.json"
    write_result(result, str(out), "json")
    side = json.loads(side_path(out, "holes").read_text())
    assert side["schema"] == "perfectsim.twostate.holes/v1"
    assert len(side["rows"]) == 3


def test_write_result_without_path(result):
    """Test tanpa path tidak ada file yang ditulis"""
    assert write_result(result, None) == []


def test_hole_plot_svg(result, tmp_path):
    """Test plot hole menghasilkan SVG deterministik"""
    plotter = HoleDecayPlotter()
    holes = result.side_tables["holes"]
    first = plotter.to_svg(holes)
    assert first.lstrip().startswith("<?xml")
    assert "<svg" in first
    assert plotter.to_svg(holes) == first
    assert plotter.to_base64(holes)
    target = plotter.save(holes, str(tmp_path / "plots" / "holes.svg"))
    assert target.exists()
