import json

import numpy as np

from tapalab.reporting import format_value, histogram_svg, line_plot_svg, write_csv, write_json


def test_format_value_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)):
        s = format_value(x)
        assert float(s) == float(x)
    assert format_value(np.int64(7)) == "7"
    assert format_value(True) == "true"
    assert format_value("rope") == "rope"


def test_csv_header_and_digits(tmp_path):
    p = write_csv(tmp_path / "a.csv", ["x", "y"], [[1, 0.1], [2, 1 / 3]])
    lines = p.read_text().splitlines()
    assert lines[0] == "x,y"
    assert lines[1] == "1,0.10000000000000001"
    assert lines[2] == "2,0.33333333333333331"


def test_json_sorted_and_native(tmp_path):
    p = write_json(tmp_path / "r.json", {"b": np.float64(1.5), "a": [np.int32(2), np.bool_(True)]})
    text = p.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [2, True], "b": 1.5}


def test_svg_is_deterministic_and_self_contained():
    series = [("tapa", [1, 10, 100], [1.0, 0.5, 0.2]), ("tapa (oracle)", [1, 10, 100], [1.0, 0.4, 0.0])]
    a = line_plot_svg(series, title="decay", logx=True, logy=True)
    b = line_plot_svg(series, title="decay", logx=True, logy=True)
    assert a == b
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert a.count("<polyline") == 2 and "stroke-dasharray" in a
    h = histogram_svg([("rope", np.linspace(0, 1, 11), np.arange(10)), ("tapa", np.linspace(-1, 1, 11), np.ones(10))])
    assert h.count("<polyline") == 2 and "rope" in h and "tapa" in h
