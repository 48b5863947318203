import pytest

from stackgrad.logio import CsvSink, csv_columns, format_value, read_csv, validate_csv


def test_columns():
    assert csv_columns(2, 1) == ["n", "t", "phase", "x_1", "x_2", "y_1", "s", "eps", "delta", "alpha", "k"]


def test_format_value_round_trips():
    for v in (0.1, 1 / 3, -2.5e-300, 7.0):
        assert float(format_value(v)) == v
    assert format_value(None) == ""
    assert format_value(3) == "3"


def test_sink_and_validation(tmp_path):
    path = tmp_path / "t.csv"
    with CsvSink(path, 1, 2) as sink:
        sink.write(0, 0, "interval", [0.5], [1.0, 2.0], 0.25, 0.0, 1.0, 1.0, 3)
        sink.write(1, 3, "interval", [0.6], [1.0, 2.0])
    header, rows = read_csv(path)
    assert rows[1][-5:] == ["", "", "", "", ""]
    assert validate_csv(path, 1, 2) == []
    assert validate_csv(path, 2, 1)


@pytest.mark.parametrize(
    "row",
    ["0,0,stage,nan,1.0,,,,,", "0,0,bogus,1.0,1.0,,,,,", "x,0,stage,1.0,1.0,,,,,", "0,0,stage,1.0,1.0,,,,,0", "0,0,stage,1.0"],
)
def test_validation_catches_bad_rows(tmp_path, row):
    path = tmp_path / "bad.csv"
    path.write_text(",".join(csv_columns(1, 1)) + "\n" + row + "\n")
    assert validate_csv(path, 1, 1)
