import json
import logging

import numpy as np
import pytest

from aogd import cli, harness
from aogd.harness import ExperimentConfig, GridPoint, ResultRow

SMALL = dict(dataset="synthetic:60:3:3", eta_grid=[0.05, 0.2], lambda_grid=[1e-4], sigma_grid=[1.0],
             repeats=2, folds=2, D=32, seed=3)


def small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def test_default_grids():
    cfg = ExperimentConfig(dataset="x")
    assert cfg.eta_grid == [2.0 ** k for k in range(-8, 0)]
    assert cfg.lambda_grid == [10.0 ** k for k in range(-8, 0)]
    points = harness.grid_points(cfg)
    assert len(points) == 8 * 8 * 4
    assert len({p.eta for p in points if p.lam == 1e-8 and p.sigma_mult == 1.0}) == 8


@pytest.mark.parametrize("kw", [dict(eta_grid=[]), dict(repeats=0), dict(folds=1), dict(learner="svm"),
                                dict(order="random"), dict(gamma_rule="bogus:1"), dict(loss="l1")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small(**kw).validate()


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(SMALL))
    cfg = ExperimentConfig.from_json_file(path)
    assert cfg.to_dict() == small().to_dict()
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict({"dataset": "x", "colour": 1})


def test_run_names():
    assert ExperimentConfig(dataset="data/german.gz").run_name == "german"
    assert ExperimentConfig(dataset="synthetic:1:2:3").run_name == "synthetic_1_2_3"
    assert ExperimentConfig(dataset="a", name="b").run_name == "b"


def test_derive_seed():
    assert harness.derive_seed(1, "a", 2) == harness.derive_seed(1, "a", 2)
    assert harness.derive_seed(1, "a", 2) != harness.derive_seed(1, "a", 3)
    assert harness.derive_seed(1, "a") != harness.derive_seed(2, "a")


def test_select_ties_and_order_invariance():
    a, b, c = GridPoint(0.1, 1e-3, 1.0), GridPoint(0.05, 1e-2, 1.0), GridPoint(0.05, 1e-3, 1.0)
    res = {a: 0.8, b: 0.8, c: 0.8, GridPoint(0.01, 1e-3, 1.0): None}
    assert harness.select(res) == c
    assert harness.select(dict(reversed(list(res.items())))) == c
    with pytest.raises(RuntimeError):
        harness.select({a: None})


def test_run_experiment_deterministic(tmp_path):
    r1 = harness.run_experiment(small(), out_dir=str(tmp_path))
    r2 = harness.run_experiment(small())
    assert r1.aucs == r2.aucs and r1.hyperparams == r2.hyperparams
    assert len(r1.aucs) == 2 and all(0 <= a <= 1 for a in r1.aucs)
    assert r1.stderr == pytest.approx(np.std(r1.aucs, ddof=1) / np.sqrt(2))
    assert r1.trace == "trace_synthetic_60_3_3_aogd_r0.csv"
    header = (tmp_path / r1.trace).read_text().splitlines()[0]
    assert header == "t,label,avg_loss,rand_loss,eta,gamma"
    assert r1.hyperparams[0]["n_train"] + r1.hyperparams[0]["n_test"] == 120


@pytest.mark.parametrize("learner", ["ogd_last", "buffer_ogd"])
def test_baseline_learners_run(learner):
    row = harness.run_experiment(small(learner=learner, repeats=1), search=False)
    assert row.learner == learner and 0 <= row.mean_auc <= 1


def test_diverged_points_are_excluded(caplog):
    cfg = small(eta_grid=[1e12, 0.05], repeats=1)
    with caplog.at_level(logging.WARNING, logger="aogd.harness"):
        ds = harness.load_dataset(cfg)
        X, y = ds.to_dense()
        res = harness.cross_validate(cfg, X, y, seed=0)
    bad = GridPoint(1e12, 1e-4, 1.0)
    assert res[bad] is None and harness.select(res).eta == 0.05
    assert "failed" in caplog.text


def test_single_class_dataset_fails(tmp_path):
    path = tmp_path / "one"
    path.write_text("+1 1:1\n+1 1:2\n")
    with pytest.raises(ValueError, match="single"):
        harness.run_experiment(small(dataset=str(path)))


def test_curve_shape_and_easy_problem():
    cfg = small(dataset="synthetic:400:2:10", eta_grid=[0.1], sigma_grid=[0.1])
    pts = harness.run_curve(cfg, [10, 100, 1000], hp=GridPoint(0.1, 1e-4, 0.1))
    assert [p.examples_seen for p in pts] == [10, 100, 640]
    assert all(0 <= p.test_auc <= 1 for p in pts)
    assert pts[-1].test_auc >= 0.95
    lines = harness.curve_csv(pts).splitlines()
    assert lines[0] == "examples_seen,test_auc" and len(lines) == 4


def row(ds, lr, auc=0.8):
    return ResultRow(ds, lr, [{"eta": 0.1}], auc, 0.01, 1.5, "t.csv", [auc, auc])


def test_report_formats():
    one = harness.report([row("d", "aogd")], "csv").splitlines()
    assert len(one) == 2 and one[0].startswith("dataset,learner,mean_auc")
    rows = [row("b", "aogd"), row("a", "ogd_last"), row("a", "aogd")]
    csv_lines = harness.report(rows, "csv").splitlines()[1:]
    assert [ln.split(",")[:2] for ln in csv_lines] == [["a", "aogd"], ["a", "ogd_last"], ["b", "aogd"]]
    assert harness.rows_from_json(harness.report(rows, "json")) == harness._sorted(rows)
    md = harness.report(rows, "markdown").splitlines()
    assert md[0] == "| Dataset | aogd | ogd_last |"
    assert md[2] == "| a | 80.00 ± 1.00 | 80.00 ± 1.00 |"
    assert md[3] == "| b | 80.00 ± 1.00 |  |"
    with pytest.raises(ValueError):
        harness.report([], "csv")
    with pytest.raises(ValueError):
        harness.report(rows, "xml")


def test_oracle_runner():
    cfg = ExperimentConfig(dataset="synthetic:50:2:4", normalization="none", eta_grid=[0.05],
                           lambda_grid=[1e-3], sigma_grid=[1.0], D=16)
    res = harness.run_oracle(cfg, jensen_every=20)
    assert res.models.shape == (100, 16)
    np.testing.assert_array_equal(res.models[0], 0.0)
    assert len(res.curve.t) == 100
    assert res.jensen and all(gap >= -1e-12 for _, gap, _ in res.jensen)
    assert harness.jensen_csv(res.jensen).startswith("t,gap,bound\n")


# ----------------------------------------------------------------------- CLI


def _cli(tmp_path, *argv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**SMALL, "repeats": 1}))
    return cli.main([argv[0], "--config", str(cfg), "--out", str(tmp_path / "out"), *argv[1:]])


def test_cli_train_and_grid(tmp_path, capsys):
    assert _cli(tmp_path, "train", "--learner", "aogd", "--learner", "ogd_last") == 0
    out = tmp_path / "out"
    for name in ("results.csv", "results.json", "results.md", "timing.json"):
        assert (out / name).exists()
    assert len((out / "results.csv").read_text().splitlines()) == 3
    assert "| synthetic_60_3_3 |" in capsys.readouterr().out
    assert _cli(tmp_path, "grid", "--seed", "5", "--order", "blocks:4") == 0
    timing = json.loads((out / "timing.json").read_text())
    assert "synthetic_60_3_3/aogd" in timing


def test_cli_curve_profile_oracle(tmp_path):
    assert _cli(tmp_path, "curve", "--checkpoints", "5,50") == 0
    assert (tmp_path / "out" / "curve_synthetic_60_3_3_aogd.csv").exists()
    assert _cli(tmp_path, "rff-profile", "--sizes", "8,16", "--pairs", "20") == 0
    prof = (tmp_path / "out" / "rff_profile.csv").read_text().splitlines()
    assert prof[0] == "D,max_abs_error,mean_abs_error,mean_abs_error_x_sqrt_D" and len(prof) == 3
    assert _cli(tmp_path, "oracle", "--jensen-every", "30") == 0
    assert (tmp_path / "out" / "regret_synthetic_60_3_3_aogd.csv").exists()


def test_cli_dataset_override_and_errors(tmp_path, capsys):
    assert _cli(tmp_path, "train", "--dataset", "synthetic:30:2:2") == 0
    assert "synthetic_30_2_2" in (tmp_path / "out" / "results.csv").read_text()
    assert _cli(tmp_path, "train", "--dataset", str(tmp_path / "missing")) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["train", "--out", str(tmp_path / "o2")])


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "aogd", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "rff-profile" in out.stdout
