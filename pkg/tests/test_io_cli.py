import json

import numpy as np
import pytest

from lrm.calibration import CalibrationParams, lambda_auto
from lrm.cli import main, resolve_seed
from lrm.datagen import BoundedBernstein, Gaussian, gen_dataset, gen_ground_truth, gen_masks
from lrm.errors import InvalidInputError
from lrm.io import dataset_from_dict, dataset_to_dict, load_dataset, save_dataset


@pytest.mark.parametrize("scenario, n, noise", [
    ("usr", 30, Gaussian(0.7)), ("cs", 12, BoundedBernstein(0.5, 1.0)),
    ("multitask", 3, Gaussian(1.0)), ("gaussian_dense", 9, None)])
def test_dataset_roundtrip_is_lossless(tmp_path, scenario, n, noise):
    truth = gen_ground_truth(4, 3, 2, 1.7, seed=1)
    op = gen_masks(scenario, 4, 3, n, seed=2)
    npt = n if scenario == "multitask" else None
    data = gen_dataset(truth, op, noise, seed=3, scenario=scenario, n_per_task=npt)
    path = tmp_path / "d.json"
    save_dataset(data, path)
    back = load_dataset(path)
    assert np.array_equal(back.y, data.y)
    assert np.array_equal(back.truth.a_star, data.truth.a_star)
    assert np.array_equal(back.op.dense_stack(), data.op.dense_stack())
    assert back.noise == data.noise and back.n_per_task == npt and back.scenario == scenario
    assert dataset_to_dict(back) == dataset_to_dict(data)


def test_mask_encoding():
    data = gen_dataset(gen_ground_truth(2, 2, 1), gen_masks("usr", 2, 2, 2, seed=0), None)
    d = dataset_to_dict(data)
    assert d["masks"][0]["type"] == "point" and set(d["masks"][0]) == {"type", "row", "col"}


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("y"),
    lambda d: d.update(N=d["N"] + 1),
    lambda d: d["masks"].__setitem__(0, {"type": "star"}),
    lambda d: d["masks"].__setitem__(0, {"type": "point", "row": 99, "col": 0}),
    lambda d: d.update(a_star=[[1.0]]),
    lambda d: d.update(noise="cauchy"),
])
def test_schema_violations(mutate):
    data = gen_dataset(gen_ground_truth(3, 3, 1), gen_masks("usr", 3, 3, 5, seed=0), Gaussian(1.0))
    d = dataset_to_dict(data)
    mutate(d)
    with pytest.raises(InvalidInputError):
        dataset_from_dict(d)


def test_seed_precedence():
    assert resolve_seed(5, {"LRM_SEED": "9"}) == 5
    assert resolve_seed(None, {"LRM_SEED": "9"}) == 9
    assert resolve_seed(None, {}) == 0


def test_cli_gen_fit_roundtrip(tmp_path, capsys):
    d = tmp_path / "d.json"
    f = tmp_path / "fit.json"
    assert main(["gen", "--scenario", "usr", "--m", "20", "--T", "20", "--r", "2", "--N", "2000",
                 "--sigma", "1.0", "--seed", "42", "-o", str(d)]) == 0
    raw = json.loads(d.read_text())
    assert raw["N"] == 2000 and raw["seed"] == 42 and len(raw["masks"]) == 2000
    assert main(["fit", "--data", str(d), "--p", "1", "--lambda", "auto:tau2", "--D", "2",
                 "-o", str(f)]) == 0
    out = json.loads(f.read_text())
    expected = lambda_auto("tau2", CalibrationParams(sigma=1.0, h=1.0, d_conf=2.0, m=20, t=20,
                                                     n_obs=2000))
    assert out["lambda_used"] == pytest.approx(expected, rel=1e-15)
    assert set(out) >= {"a_hat", "objective", "iterations", "converged", "lambda_used"}


def test_cli_seed_determines_output(tmp_path, monkeypatch):
    paths = [tmp_path / f"{k}.json" for k in range(3)]
    args = ["gen", "--scenario", "cs", "--m", "4", "--T", "4", "--r", "1", "--N", "10"]
    assert main(args + ["--seed", "3", "-o", str(paths[0])]) == 0
    monkeypatch.setenv("LRM_SEED", "3")
    assert main(args + ["-o", str(paths[1])]) == 0
    assert main(args + ["--seed", "4", "-o", str(paths[2])]) == 0
    assert paths[0].read_text() == paths[1].read_text() != paths[2].read_text()


def test_cli_calibrate_prints_tau4(capsys):
    assert main(["calibrate", "--bound", "tau4", "--sigma", "1", "--D", "2", "--m", "10",
                 "--T", "10", "--N", "100"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.50596, abs=1e-5)


def test_cli_fit_p_auto(tmp_path):
    d, f = tmp_path / "d.json", tmp_path / "f.json"
    main(["gen", "--scenario", "usr", "--m", "4", "--T", "4", "--r", "1", "--N", "100",
          "--seed", "1", "-o", str(d)])
    assert main(["fit", "--data", str(d), "--p", "auto", "--lambda", "0.05", "-o", str(f)]) == 0
    assert json.loads(f.read_text())["p"] == pytest.approx(1 / np.log(25))


def test_cli_studies_and_pack(tmp_path):
    out, summ = tmp_path / "r.csv", tmp_path / "s.csv"
    common = ["--scenario", "usr", "--m", "5", "--T", "5", "--r", "1", "--N", "30,60",
              "--trials", "2", "--noise", "bernstein", "--H", "1"]
    assert main(["rates", *common, "--lambda", "0.1", "-o", str(out), "--summary", str(summ)]) == 0
    assert out.read_text().startswith("scenario,m,T,r,N,trial,seed,p,lambda,")
    assert summ.read_text().startswith("N,median_pred_sq,holds_rate")
    assert main(["coverage", *common, "--lambda", "auto:tau2", "--bound", "usr_s1",
                 "-o", str(out), "--jobs", "2"]) == 0
    assert main(["noise", *common, "--bound", "tau2", "-o", str(out)]) == 0
    pack = tmp_path / "p.json"
    assert main(["pack", "--n-bits", "16", "--min-dist", "2", "--target", "4", "-o", str(pack)]) == 0
    assert len(json.loads(pack.read_text())["codewords"]) == 4


@pytest.mark.parametrize("argv, code", [
    (["bogus"], 2),
    (["gen", "--scenario", "usr"], 2),
    (["fit", "--data", "x.json", "--lambda", "auto:nope", "-o", "f.json"], 2),
    (["fit", "--data", "missing.json", "--lambda", "1", "-o", "f.json"], 1),
    (["calibrate", "--bound", "tau2", "--sigma", "1", "--m", "2", "--T", "2", "--N", "5"], 2),
    (["gen", "--scenario", "cs", "--m", "2", "--T", "2", "--r", "1", "--N", "9", "-o", "d.json"], 2),
    (["pack", "--n-bits", "4", "--min-dist", "2", "--target", "2", "-o", "/no/such/dir/p.json"], 2),
])
def test_cli_error_codes(tmp_path, monkeypatch, capsys, argv, code):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"ERROR {code}:")


def test_cli_bad_dataset_json_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"m": 2}')
    assert main(["fit", "--data", str(bad), "--lambda", "1", "-o", str(tmp_path / "f.json")]) == 1
    assert capsys.readouterr().err.startswith("ERROR 1:")
