import json

import numpy as np
import pytest

from accord import fileio
from accord.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def chain_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--kind", "chain", "--p", "12", "--n", "200", "--rho", "0.3",
                 "--seed", "4", "--out", str(out)]) == EXIT_OK
    return out


def test_simulate_outputs(chain_dir):
    for name in ("X.bin", "theta_true.mtx", "edges.tsv", "metadata.json", "manifest.json"):
        assert (chain_dir / name).exists()
    x = fileio.read_data(chain_dir / "X.bin")
    assert x.shape == (200, 12)
    meta = json.loads((chain_dir / "metadata.json").read_text())
    assert meta["num_edges"] == 11
    manifest = json.loads((chain_dir / "manifest.json").read_text())
    assert manifest["command"] == "simulate"


def test_simulate_deterministic(tmp_path, chain_dir):
    main(["simulate", "--kind", "chain", "--p", "12", "--n", "200", "--rho", "0.3",
          "--seed", "4", "--out", str(tmp_path)])
    assert (tmp_path / "X.bin").read_bytes() == (chain_dir / "X.bin").read_bytes()


def test_simulate_csv(tmp_path):
    assert main(["simulate", "--kind", "star", "--p", "20", "--d", "9", "--n", "30",
                 "--format", "csv", "--out", str(tmp_path)]) == EXIT_OK
    assert fileio.read_data(tmp_path / "X.csv").shape == (30, 20)


def test_fit_single_lambda(tmp_path, chain_dir):
    rc = main(["fit", "--data", str(chain_dir / "X.bin"), "--lambda", "0.1",
               "--truth", str(chain_dir / "theta_true.mtx"), "--workers", "1",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["fit"]["converged"]
    assert rep["eval"]["tp"] + rep["eval"]["fn"] == 11
    om = fileio.read_matrix_market(tmp_path / "omega.mtx")
    assert om.shape == (12, 12)
    assert (tmp_path / "trace.csv").read_text().startswith("iteration,objective,step")


def test_fit_path_debias_then_eval(tmp_path, chain_dir):
    fit_dir = tmp_path / "fit"
    rc = main(["fit", "--data", str(chain_dir / "X.bin"), "--path", "--n-lambdas", "6",
               "--ratio", "0.05", "--debias", "--truth", str(chain_dir / "theta_true.mtx"),
               "--workers", "1", "--out", str(fit_dir)])
    assert rc == EXIT_OK
    rep = json.loads((fit_dir / "report.json").read_text())
    assert 0 <= rep["auprc"] <= 1
    assert len(list((fit_dir / "path").glob("omega_*.mtx"))) == 6
    assert (fit_dir / "omega_debiased.mtx").exists()
    eval_dir = tmp_path / "eval"
    rc = main(["eval", "--estimate", str(fit_dir / "omega.mtx"),
               "--truth", str(chain_dir / "theta_true.mtx"),
               "--path-dir", str(fit_dir), "--out", str(eval_dir)])
    assert rc == EXIT_OK
    ev = json.loads((eval_dir / "eval.json").read_text())
    assert ev["auprc"] == pytest.approx(rep["auprc"])
    assert ev["tp"] == rep["eval"]["tp"]
    assert (eval_dir / "pr.csv").read_text().splitlines()[0] == "lambda,recall,precision"


def test_fit_csv_input(tmp_path):
    x = np.random.default_rng(0).standard_normal((40, 5))
    fileio.write_csv(tmp_path / "x.csv", x, header=True)
    assert main(["fit", "--data", str(tmp_path / "x.csv"), "--lambda", "0.2",
                 "--workers", "1", "--out", str(tmp_path / "o")]) == EXIT_OK


def test_missing_file_is_io_error(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "none.bin"), "--lambda", "0.1",
                 "--out", str(tmp_path)]) == EXIT_IO


def test_bad_parameter_is_usage_error(tmp_path):
    assert main(["simulate", "--kind", "star", "--d", "5", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["simulate", "--kind", "chain", "--rho", "0.7", "--out", str(tmp_path)]) == EXIT_USAGE


def test_nonfinite_data_is_usage_error(tmp_path):
    x = np.ones((4, 3))
    x[2, 1] = np.nan
    fileio.write_binary(tmp_path / "x.bin", x)
    assert main(["fit", "--data", str(tmp_path / "x.bin"), "--lambda", "0.1",
                 "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_nonconvergence_exit_code(tmp_path, chain_dir):
    assert main(["fit", "--data", str(chain_dir / "X.bin"), "--lambda", "0.05",
                 "--max-iter", "2", "--workers", "1", "--out", str(tmp_path)]) == 3


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_bench(tmp_path):
    assert main(["bench", "--p", "64", "--n", "16", "--density", "0.05",
                 "--workers", "1,2,4", "--repeat", "1", "--out", str(tmp_path)]) == EXIT_OK
    rec = json.loads((tmp_path / "bench.json").read_text())
    assert [r["P"] for r in rec] == [1, 2, 4]
    assert rec[0]["bytes_communicated"] == 0 and rec[2]["bytes_communicated"] > 0


def test_replicate_small(tmp_path):
    rc = main(["replicate", "--kind", "chain", "--p", "10", "--n", "150", "--replicates", "2",
               "--n-lambdas", "5", "--ratio", "0.05", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rows = json.loads((tmp_path / "replicates.json").read_text())
    assert [r["seed"] for r in rows] == [0, 1]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["auprc"]["count"] == 2


def test_workers_env(monkeypatch):
    from accord.cli import default_workers
    monkeypatch.setenv("ACCORD_WORKERS", "3")
    assert default_workers() == 3
