import json

import pytest

from graphstab.cli import build_parser, invariant_suite, main


def csv_body(path):
    return [line for line in path.read_text().splitlines()
            if not line.startswith("#")]


@pytest.fixture
def trained_dir(tmp_path, ratings_file):
    out = tmp_path / "run"
    code = main([
        "train", "--data", str(ratings_file), "--movie-id", "7",
        "--mu", "0.0", "0.5", "--seeds", "0", "1", "--epochs", "3",
        "--features", "4", "--taps", "3", "--out", str(out),
    ])
    assert code == 0
    return out


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_verify_quick_passes(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "all invariants satisfied" in out
    assert "residual" in out and "tolerance" in out


def test_verify_detects_injected_fault(capsys):
    assert main(["verify", "--quick", "--inject-fault"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out


def test_invariant_suite_structure():
    checks = invariant_suite(quick=True, seed=1)
    names = [name for name, *_ in checks]
    assert len(names) == len(set(names)) >= 6
    for _, residual, tol, ok in checks:
        assert ok == (residual <= tol)
        assert ok


def test_train_outputs(trained_dir):
    summary = json.loads((trained_dir / "train_summary.json").read_text())
    assert set(summary["mus"]) == {"0.0", "0.5"}
    for mu in ("0.0", "0.5"):
        assert len(summary["mus"][mu]["rmse_per_split"]) == 2
        for seed in (0, 1):
            assert (trained_dir / f"checkpoint_mu{mu}_split{seed}.json").is_file()
            trace = csv_body(trained_dir / f"trace_mu{mu}_split{seed}.csv")
            assert trace[0] == "epoch,loss,penalty"
            assert len(trace) == 4
    rmse_rows = csv_body(trained_dir / "rmse.csv")
    assert rmse_rows[0] == "mu,split_seed,test_rmse"
    assert len(rmse_rows) == 5
    for seed in (0, 1):
        assert (trained_dir / f"split_{seed}.csv").is_file()


def test_train_deterministic(tmp_path, ratings_file):
    bodies = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main([
            "train", "--data", str(ratings_file), "--movie-id", "7",
            "--mu", "0.0", "--seeds", "0", "--epochs", "2",
            "--features", "3", "--taps", "2", "--out", str(out),
        ]) == 0
        bodies.append(csv_body(out / "rmse.csv"))
    assert bodies[0] == bodies[1]


def test_transfer(trained_dir, ratings_file, tmp_path, capsys):
    out = tmp_path / "transfer"
    assert main([
        "transfer", "--data", str(ratings_file),
        "--checkpoints", str(trained_dir), "--movie-ids", "3", "5",
        "--out", str(out),
    ]) == 0
    rows = csv_body(out / "transfer.csv")
    assert rows[0] == "mu,movie_id,rmse_mean,rmse_std,degradation_percent"
    assert len(rows) == 1 + 2 * 2  # two mus, two movies
    assert "degradation" in capsys.readouterr().out


def test_perturb_sweep(trained_dir, ratings_file, tmp_path):
    out = tmp_path / "perturb"
    assert main([
        "perturb-sweep", "--data", str(ratings_file),
        "--checkpoints", str(trained_dir), "--epsilon", "0.05",
        "--draws", "2", "--out", str(out),
    ]) == 0
    rows = csv_body(out / "perturb_sweep.csv")
    assert rows[0].startswith("mu,split_seed,epsilon,draw")
    assert len(rows) == 1 + 2 * 2 * 1 * 2  # mus x seeds x epsilons x draws


def test_split_sweep(trained_dir, ratings_file, tmp_path):
    out = tmp_path / "splits"
    assert main([
        "split-sweep", "--data", str(ratings_file),
        "--checkpoints", str(trained_dir), "--splits", "0.5", "0.8",
        "--out", str(out),
    ]) == 0
    rows = csv_body(out / "split_sweep.csv")
    assert len(rows) == 1 + 2 * 2 * 2


def test_demo_outputs(tmp_path):
    out = tmp_path / "demo"
    assert main(["demo", "--out", str(out), "--seed", "1"]) == 0
    for name in ("il_response.csv", "eigenvalues.csv", "tradeoff.csv",
                 "mixing_relu.csv", "mixing_linear.csv"):
        body = csv_body(out / name)
        assert len(body) > 1, name
    tradeoff = csv_body(out / "tradeoff.csv")
    assert {row.split(",")[0] for row in tradeoff[1:]} == {
        "sharp", "integral_lipschitz", "gnn"
    }


def test_missing_data_exits_2(tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "nope.data"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err
