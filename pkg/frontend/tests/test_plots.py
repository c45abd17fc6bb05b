import numpy as np
import pytest

from tgapod_plots.cli import main, summarize_main
from tgapod_plots.figures import plot_indicator_vs_error, plot_method_comparison
from tgapod_plots.traces import TRACE_HEADER, load_trace, read_summary, summarize


def _write_trace(path, times, indicators, errors, marked, modes=None):
    modes = modes if modes is not None else [3] * len(times)
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for k, (t, eta, err, flag, m) in enumerate(zip(times, indicators, errors, marked, modes)):
            fh.write(f"{k},{t!r},{eta!r},{err!r},{flag},{m}\n")
    return str(path)


def _synthetic_trace(path, n=10, marked_at=(3, 7)):
    times = [0.1 * (k + 1) for k in range(n)]
    indicators = [1e-3 * (k + 1) for k in range(n)]
    errors = [1e-4 * (k + 1) for k in range(n)]
    marked = [1 if k in marked_at else 0 for k in range(n)]
    return _write_trace(path, times, indicators, errors, marked)


# ---------------------------------------------------------------- parsing


def test_load_trace_roundtrip(tmp_path):
    path = _synthetic_trace(tmp_path / "trace.csv")
    trace = load_trace(path)
    assert len(trace) == 10
    assert trace.n_marked == 2
    assert trace.times[0] == pytest.approx(0.1)


def test_load_trace_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("step,time,err\n0,0.0,1.0\n")
    with pytest.raises(ValueError, match="header"):
        load_trace(str(path))


def test_load_trace_rejects_nonincreasing_times(tmp_path):
    path = _write_trace(tmp_path / "bad.csv", [0.1, 0.1], [0.0, 0.0], [0.0, 0.0], [0, 0])
    with pytest.raises(ValueError, match="increasing"):
        load_trace(str(path))


def test_load_trace_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(TRACE_HEADER + "\n")
    with pytest.raises(ValueError, match="no data"):
        load_trace(str(path))


# ---------------------------------------------------------------- figures


def test_marker_count_matches_marked_rows(tmp_path):
    path = _synthetic_trace(tmp_path / "trace.csv", marked_at=(1, 4, 8))
    meta = plot_indicator_vs_error(load_trace(path), str(tmp_path / "fig.svg"))
    assert meta["markers"] == 3
    assert (tmp_path / "fig.svg").exists()


def test_no_marked_rows_no_markers(tmp_path):
    path = _synthetic_trace(tmp_path / "trace.csv", marked_at=())
    meta = plot_indicator_vs_error(load_trace(path), str(tmp_path / "fig.png"))
    assert meta["markers"] == 0
    assert meta["series"] == 2


def test_all_zero_error_column_renders(tmp_path):
    path = _write_trace(
        tmp_path / "zero.csv", [0.1, 0.2, 0.3], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0, 0, 0]
    )
    meta = plot_indicator_vs_error(load_trace(path), str(tmp_path / "fig.svg"))
    assert meta["markers"] == 0
    assert (tmp_path / "fig.svg").exists()


def test_rendering_does_not_modify_input_and_is_stable(tmp_path):
    path = _synthetic_trace(tmp_path / "trace.csv")
    before = open(path, "rb").read()
    meta_a = plot_indicator_vs_error(load_trace(path), str(tmp_path / "a.svg"))
    meta_b = plot_indicator_vs_error(load_trace(path), str(tmp_path / "b.svg"))
    assert open(path, "rb").read() == before
    assert meta_a["figsize"] == meta_b["figsize"]
    assert meta_a["series"] == meta_b["series"]


def test_method_comparison_series_count(tmp_path):
    paths = [_synthetic_trace(tmp_path / f"t{i}.csv") for i in range(3)]
    traces = [load_trace(p) for p in paths]
    meta = plot_method_comparison(traces, ["pod", "apod", "tg"], str(tmp_path / "cmp.svg"))
    assert meta["series"] == 3
    with pytest.raises(ValueError):
        plot_method_comparison(traces, ["one"], str(tmp_path / "bad.svg"))


# ---------------------------------------------------------------- summary


SUMMARY = (
    "method,dofs_full,dofs_reduced,avg_error,updates,wall_seconds\n"
    "pod,512,13,0.559466,0,535.47\n"
    "tg-apod,512,54,0.004524,7,2693.41\n"
    "fem,512,0,0.0,0,1.5e+04\n"
)


def test_summarize_reproduces_rows_verbatim(tmp_path):
    path = tmp_path / "summary.csv"
    path.write_text(SUMMARY)
    rendered = summarize(str(path))
    lines = rendered.splitlines()
    assert len(lines) == 4
    for raw, line in zip(SUMMARY.splitlines(), lines):
        assert raw.split(",") == line.split()


def test_read_summary_field_mismatch(tmp_path):
    path = tmp_path / "summary.csv"
    path.write_text("a,b\n1,2,3\n")
    with pytest.raises(ValueError, match="fields"):
        read_summary(str(path))


# ---------------------------------------------------------------- cli


def test_cli_reports_marker_count(tmp_path, capsys):
    path = _synthetic_trace(tmp_path / "trace.csv", marked_at=(2, 5))
    code = main([path, "-o", str(tmp_path / "fig.svg")])
    assert code == 0
    out = capsys.readouterr().out
    assert "markers: 2" in out
    assert "wrote" in out


def test_cli_compare_mode(tmp_path, capsys):
    a = _synthetic_trace(tmp_path / "a.csv")
    b = _synthetic_trace(tmp_path / "b.csv")
    code = main([a, "--compare", b, "-o", str(tmp_path / "cmp.svg")])
    assert code == 0
    assert "series: 2" in capsys.readouterr().out


def test_cli_bad_input_exit_code(tmp_path, capsys):
    missing = str(tmp_path / "nope.csv")
    assert main([missing, "-o", str(tmp_path / "fig.svg")]) == 2
    assert "plot_trace:" in capsys.readouterr().err


def test_summarize_cli(tmp_path, capsys):
    path = tmp_path / "summary.csv"
    path.write_text(SUMMARY)
    assert summarize_main([str(path)]) == 0
    out = capsys.readouterr().out
    assert "0.004524" in out and "tg-apod" in out
