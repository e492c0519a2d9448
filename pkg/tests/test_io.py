import numpy as np
import pytest

from greyhull._errors import ConfigurationError, DatasetFormatError
from greyhull.io import (
    dataset_text,
    load_config,
    read_dataset,
    read_params,
    read_scenario,
    write_dataset,
    write_params,
)


def test_round_trip_is_byte_identical(dataset, tmp_path):
    first = write_dataset(dataset, tmp_path / "a.csv")
    loaded = read_dataset(first)
    second = write_dataset(loaded, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    assert loaded.header == dataset.header
    assert loaded.names == dataset.names
    for a, b in zip(loaded, dataset):
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.states[:, :6], b.states[:, :6])


def test_header_and_units(dataset):
    text = dataset_text(dataset)
    lines = text.split("\n")
    assert lines[0].startswith("# ")
    assert "# units:" in text
    assert "#   delta: deg" in text
    column_row = next(line for line in lines if not line.startswith("#"))
    assert column_row == "trajectory,k,x,y,psi,u,v,r,n,delta,c_n,c_delta"


def _corrupt(path, line_no, column, value):
    lines = path.read_text().split("\n")
    fields = lines[line_no - 1].split(",")
    fields[column] = value
    lines[line_no - 1] = ",".join(fields)
    path.write_text("\n".join(lines))


def _first_data_line(path):
    lines = path.read_text().split("\n")
    return next(i for i, line in enumerate(lines) if not line.startswith("#")) + 2


@pytest.mark.parametrize("offset, column, value", [(3, 2, "abc"), (5, 1, "x"), (7, 5, "")])
def test_malformed_value_reports_line(dataset, tmp_path, offset, column, value):
    path = write_dataset(dataset, tmp_path / "bad.csv")
    line = _first_data_line(path) + offset
    _corrupt(path, line, column, value)
    with pytest.raises(DatasetFormatError) as e:
        read_dataset(path)
    assert e.value.line == line
    assert f":{line}:" in str(e.value)


def test_missing_row_is_detected(dataset, tmp_path):
    path = write_dataset(dataset, tmp_path / "short.csv")
    lines = path.read_text().split("\n")
    del lines[_first_data_line(path) + 2]
    path.write_text("\n".join(lines))
    with pytest.raises(DatasetFormatError):
        read_dataset(path)


def test_missing_header(dataset, tmp_path):
    path = tmp_path / "noheader.csv"
    path.write_text(dataset.frame.to_csv(index=False))
    with pytest.raises(DatasetFormatError) as e:
        read_dataset(path)
    assert e.value.line == 1


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_dataset(tmp_path / "nothing.csv")


def test_params_round_trip(preset, tmp_path):
    path = write_params(preset.fitted, tmp_path / "p.yaml")
    assert read_params(path) == preset.fitted


def test_params_errors(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("\n".join(f"p{i}: 0.0" for i in range(10)))
    with pytest.raises(DatasetFormatError, match="p10"):
        read_params(path)
    path.write_text("\n".join(f"p{i}: 0.0" for i in range(11)) + "\nq1: 1.0\n")
    with pytest.raises(DatasetFormatError) as e:
        read_params(path)
    assert e.value.line == 12


def test_read_scenario(tmp_path):
    path = tmp_path / "turn.yaml"
    path.write_text(
        "family: turning_circle\n"
        "params: {rpm: 200, rudder: 20, start: 5}\n"
        "initial: {u: 7.0, n: 200, delta: 10}\n"
        "K: 50\n"
    )
    spec = read_scenario(path)
    assert spec.name == "turn"
    assert spec.K == 50
    assert spec.initial.u == 7.0
    assert spec.initial.delta == pytest.approx(np.deg2rad(10.0))
    assert spec.params["rudder"] == 20.0


def test_read_scenario_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("family: zigzag\nparams: {rpm: 1, rudder: 10, heading: 10}\nspeed: 3\n")
    with pytest.raises(DatasetFormatError) as e:
        read_scenario(path)
    assert e.value.line == 3


def test_load_config(tmp_path):
    assert load_config(None).preset == "shipA"
    path = tmp_path / "config.yaml"
    path.write_text("preset: shipB\nK: 60\nsolver: {max_iter: 10}\n")
    config = load_config(path)
    assert config.preset == "shipB"
    assert config.solver_options().max_iter == 10
    path.write_text("preset: shipB\nhorizon: 60\n")
    with pytest.raises(ConfigurationError):
        load_config(path)
