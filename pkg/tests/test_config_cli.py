import numpy as np
import pytest

from tgapod.adaptive import ErrorTrace
from tgapod.cli import main, run_convergence, run_experiment, run_sweep
from tgapod.config import ConfigError, parse_config


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


TINY_CASE = """
method = pod
problem.name = kolmogorov
problem.eps = 0.1
problem.T = 0.6
fine.n = 4
fine.dt = 0.02
adaptive.T0 = 0.2
adaptive.dT = 0.1
adaptive.dM = 2
"""

TINY_TG = """
method = tg-apod
problem.name = kolmogorov
problem.eps = 0.1
problem.T = 0.6
fine.n = 4
fine.dt = 0.02
coarse.n = 2
coarse.dt = 0.04
adaptive.T0 = 0.2
adaptive.dT = 0.2
adaptive.dM = 2
adaptive.eta0 = 0.001
"""


# ---------------------------------------------------------------- parsing


def test_minimal_config_applies_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, "method = pod\n"))
    assert cfg.method == "pod"
    assert cfg.gamma1 == 0.999
    assert cfg.gamma2 == 0.999
    assert cfg.gamma3 == 1.0 - 1.0e-8
    assert cfg.eta0 == 0.005
    params = cfg.adaptive_params()
    assert (params.T0, params.dT, params.dM) == (1.5, 1.0, 5)


def test_small_eps_switches_warmup_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, "method = pod\nproblem.eps = 0.01\nproblem.T = 20\n"))
    params = cfg.adaptive_params()
    assert (params.T0, params.dT, params.dM) == (5.0, 3.0, 20)


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="problem.epsilon"):
        parse_config(_write(tmp_path, "problem.epsilon = 0.1\n"))


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(_write(tmp_path, "problem.eps = 0.1\nproblem.eps = 0.2\n"))


def test_misaligned_coarse_step_names_both_values(tmp_path):
    text = TINY_TG.replace("coarse.dt = 0.04", "coarse.dt = 0.05")
    with pytest.raises(ConfigError) as err:
        parse_config(_write(tmp_path, text))
    message = str(err.value)
    assert "0.05" in message and "0.02" in message


def test_negative_threshold_rejected(tmp_path):
    with pytest.raises(ConfigError, match="eta0"):
        parse_config(_write(tmp_path, "adaptive.eta0 = -1\n"))


def test_bad_method_rejected(tmp_path):
    with pytest.raises(ConfigError, match="method"):
        parse_config(_write(tmp_path, "method = dmd\n"))


def test_non_numeric_value_rejected(tmp_path):
    with pytest.raises(ConfigError, match="fine.dt"):
        parse_config(_write(tmp_path, "fine.dt = fast\n"))


# ---------------------------------------------------------------- run_experiment


def test_fem_run_error_column_zero(tmp_path):
    cfg = parse_config(_write(tmp_path, TINY_CASE.replace("method = pod", "method = fem")))
    cfg.out_dir = str(tmp_path / "out")
    record = run_experiment(cfg)
    assert record["method"] == "fem"
    assert record["avg_error"] == 0.0
    trace = ErrorTrace.read_csv(str(tmp_path / "out" / "trace.csv"))
    assert np.array_equal(trace.errors, np.zeros(len(trace)))
    summary = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert summary[0] == "method,dofs_full,dofs_reduced,avg_error,updates,wall_seconds"
    assert summary[1].startswith("fem,64,0,0.0,0,")


def test_pod_run_writes_trace(tmp_path):
    cfg = parse_config(_write(tmp_path, TINY_CASE))
    cfg.out_dir = str(tmp_path / "out")
    record = run_experiment(cfg)
    assert record["dofs_reduced"] >= 1
    trace = ErrorTrace.read_csv(str(tmp_path / "out" / "trace.csv"))
    assert len(trace) == 31


def test_tg_run_writes_marked_and_coarse_trace(tmp_path):
    cfg = parse_config(_write(tmp_path, TINY_TG))
    cfg.out_dir = str(tmp_path / "out")
    record = run_experiment(cfg)
    assert (tmp_path / "out" / "coarse_trace.csv").exists()
    assert (tmp_path / "out" / "marked.txt").exists()
    assert record["updates"] == len((tmp_path / "out" / "marked.txt").read_text().split())


def test_reruns_byte_identical_except_wall_seconds(tmp_path):
    cfg = parse_config(_write(tmp_path, TINY_TG))
    cfg.out_dir = str(tmp_path / "out")
    run_experiment(cfg)
    first_trace = (tmp_path / "out" / "trace.csv").read_bytes()
    first_coarse = (tmp_path / "out" / "coarse_trace.csv").read_bytes()
    first_marked = (tmp_path / "out" / "marked.txt").read_bytes()
    run_experiment(cfg)
    assert (tmp_path / "out" / "trace.csv").read_bytes() == first_trace
    assert (tmp_path / "out" / "coarse_trace.csv").read_bytes() == first_coarse
    assert (tmp_path / "out" / "marked.txt").read_bytes() == first_marked
    rows = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert len(rows) == 3
    assert rows[1].rsplit(",", 1)[0] == rows[2].rsplit(",", 1)[0]


# ---------------------------------------------------------------- cli entry


def test_cli_run_pod_exit_zero(tmp_path, capsys):
    path = _write(tmp_path, TINY_CASE)
    code = main(["run-pod", "--config", path, "--out", str(tmp_path / "out")])
    assert code == 0
    out = capsys.readouterr().out
    assert "pod:" in out and "avg_error" in out


def test_cli_subcommand_overrides_method(tmp_path):
    path = _write(tmp_path, TINY_CASE.replace("method = pod\n", ""))
    code = main(["run-fem", "--config", path, "--out", str(tmp_path / "out")])
    assert code == 0
    assert (tmp_path / "out" / "trace.csv").exists()


def test_cli_method_subcommand_conflict(tmp_path, capsys):
    path = _write(tmp_path, TINY_CASE)
    code = main(["run-fem", "--config", path, "--out", str(tmp_path / "out")])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_cli_reports_config_error(tmp_path, capsys):
    path = _write(tmp_path, "adaptive.eta0 = -3\n")
    code = main(["run-pod", "--config", path])
    assert code == 2
    err = capsys.readouterr().err
    assert "eta0" in err


def test_cli_missing_file(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["run-pod"])  # --config required


def test_cli_solver_failure_exit_code(tmp_path, capsys):
    # a one-cycle Krylov cap at an unreachable tolerance cannot converge
    text = TINY_CASE + "solver.method = krylov\nsolver.rel_tol = 1e-15\nsolver.max_iter = 1\n"
    path = _write(tmp_path, text)
    code = main(["run-pod", "--config", path, "--out", str(tmp_path / "out")])
    assert code == 3
    assert "solver failure" in capsys.readouterr().err


# ---------------------------------------------------------------- converge / sweep


def test_convergence_smoke(tmp_path):
    cfg = parse_config(
        _write(
            tmp_path,
            "method = fem\n"
            "converge.ns = 4,6\n"
            "converge.dts = 0.05,0.025\n"
            "converge.spatial_dt = 0.01\n"
            "converge.temporal_n = 4\n"
            "converge.t_end_spatial = 0.05\n"
            "converge.t_end_temporal = 0.2\n"
            "converge.ref_dt = 0.003125\n",
        )
    )
    cfg.out_dir = str(tmp_path / "out")
    table = run_convergence(cfg)
    assert len(table["spatial"]) == 2
    assert len(table["temporal"]) == 2
    assert table["spatial"][0]["error"] > table["spatial"][1]["error"]
    assert table["temporal"][0]["error"] > table["temporal"][1]["error"]
    assert (tmp_path / "out" / "convergence.csv").exists()


def test_sweep_smoke(tmp_path):
    cfg = parse_config(
        _write(
            tmp_path,
            TINY_TG + "sweep.axis = gamma12\nsweep.values = 0.9,0.999\n",
        )
    )
    cfg.out_dir = str(tmp_path / "out")
    rows = run_sweep(cfg)
    assert len(rows) == 2
    assert all(row["axis"] == "gamma12" for row in rows)
    content = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert content[0] == "axis,value,dofs_reduced,avg_error,updates,wall_seconds"
    assert len(content) == 3
