import math

import pytest

from nuq.cli import main
from nuq.storage import read_embeddings


def run(args):
    return main([str(a) for a in args])


def read_csv_rows(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


@pytest.fixture
def moons_model(tmp_path):
    train = tmp_path / "train.nuqe"
    model = tmp_path / "model.nuqm"
    assert run(["toy", "--name", "two_moons", "--n", "400", "--seed", "1",
                "--noise", "0.1", "--out", train]) == 0
    assert run(["fit", "--train", train, "--bandwidth", "0.25",
                "--kernel", "gaussian", "--density", "kde", "--out", model]) == 0
    return train, model


def test_toy_and_fit_and_score(moons_model, tmp_path, capsys):
    train, model = moons_model
    queries = tmp_path / "queries.nuqe"
    scores = tmp_path / "scores.csv"
    assert run(["toy", "--name", "two_moons", "--n", "50", "--seed", "2",
                "--out", queries]) == 0
    assert run(["score", "--model", model, "--input", queries, "--out", scores]) == 0
    header, rows = read_csv_rows(scores)
    assert header == ["index", "pred", "p_max", "U_a", "U_e", "U_t", "tau",
                      "density", "out_of_support"]
    assert len(rows) == 50
    assert [int(r[0]) for r in rows] == list(range(50))
    for r in rows:
        total = float(r[5])
        assert total == pytest.approx(float(r[3]) + float(r[4]), rel=1e-12)


def test_score_serializes_inf(moons_model, tmp_path):
    _, model = moons_model
    far = tmp_path / "far.nuqe"
    scores = tmp_path / "far_scores.csv"
    assert run(["toy", "--name", "ring_ood", "--n", "5", "--seed", "3",
                "--r-min", "400", "--r-max", "500", "--out", far]) == 0
    assert run(["score", "--model", model, "--input", far, "--out", scores]) == 0
    _, rows = read_csv_rows(scores)
    for r in rows:
        assert r[4] == "inf" and r[5] == "inf"
        assert r[8] == "1"
        assert math.isinf(float(r[4]))


def test_ood_eval_and_curve(moons_model, tmp_path, capsys):
    train, model = moons_model
    held = tmp_path / "held.nuqe"
    ring = tmp_path / "ring.nuqe"
    curve = tmp_path / "curve.csv"
    assert run(["toy", "--name", "two_moons", "--n", "100", "--seed", "9",
                "--out", held]) == 0
    assert run(["toy", "--name", "ring_ood", "--n", "80", "--seed", "4",
                "--r-min", "30", "--r-max", "40",
                "--center-x", "0.5", "--center-y", "0.25", "--out", ring]) == 0
    capsys.readouterr()
    assert run(["ood-eval", "--model", model, "--in-dist", held, "--ood", ring,
                "--measure", "epistemic", "--curve-out", curve]) == 0
    out = capsys.readouterr().out
    auc = float(out.split("roc_auc=")[1].split()[0])
    assert auc == 1.0
    header, rows = read_csv_rows(curve)
    assert header == ["k", "ood_count"]
    assert len(rows) == 180
    assert int(rows[-1][1]) == 80
    roc = tmp_path / "roc.csv"
    assert run(["ood-eval", "--model", model, "--in-dist", held, "--ood", ring,
                "--roc-out", roc]) == 0
    header, rows = read_csv_rows(roc)
    assert header == ["fpr", "tpr"]
    assert rows[0] == ["0", "0"] and rows[-1] == ["1", "1"]


def test_reject_eval_and_decisions(moons_model, tmp_path, capsys):
    train, model = moons_model
    test_set = tmp_path / "test.nuqe"
    decisions = tmp_path / "decisions.csv"
    assert run(["toy", "--name", "two_moons", "--n", "120", "--seed", "5",
                "--out", test_set]) == 0
    capsys.readouterr()
    assert run(["reject-eval", "--model", model, "--test", test_set,
                "--lambda", "0.25", "--beta", "0.05", "--plugin-baseline",
                "--out", decisions]) == 0
    out = capsys.readouterr().out
    assert "chow_risk=" in out and "rcc_auc=" in out and "plugin_chow_risk=" in out
    header, rows = read_csv_rows(decisions)
    assert header == ["index", "action", "u_beta", "predicted_class"]
    assert len(rows) == 120
    for r in rows:
        assert r[1] in ("predict", "reject")
        if r[1] == "reject":
            assert r[3] == ""


def test_reject_eval_curve_outputs(moons_model, tmp_path, capsys):
    _, model = moons_model
    test_set = tmp_path / "test.nuqe"
    rc = tmp_path / "rc.csv"
    ar = tmp_path / "ar.csv"
    assert run(["toy", "--name", "two_moons", "--n", "80", "--seed", "11",
                "--out", test_set]) == 0
    capsys.readouterr()
    assert run(["reject-eval", "--model", model, "--test", test_set,
                "--lambda", "0.25", "--rc-curve-out", rc, "--ar-curve-out", ar]) == 0
    header, rows = read_csv_rows(rc)
    assert header == ["coverage", "risk"] and len(rows) == 80
    assert float(rows[-1][0]) == 1.0
    header, rows = read_csv_rows(ar)
    assert header == ["coverage", "accuracy"] and len(rows) == 80
    for r in rows:
        assert 0.0 <= float(r[1]) <= 1.0


def test_csv_input_routing(moons_model, tmp_path):
    _, model = moons_model
    queries = tmp_path / "queries.csv"
    queries.write_text("0.1,0.2\n1.5,0.4\n")
    scores = tmp_path / "scores.csv"
    assert run(["score", "--model", model, "--input", queries, "--out", scores]) == 0
    _, rows = read_csv_rows(scores)
    assert len(rows) == 2


def test_reject_eval_unlabeled_prints_abstain_rate_only(moons_model, tmp_path, capsys):
    _, model = moons_model
    probes = tmp_path / "probes.nuqe"
    assert run(["toy", "--name", "ring_ood", "--n", "30", "--seed", "6",
                "--r-min", "40", "--r-max", "50", "--out", probes]) == 0
    capsys.readouterr()
    assert run(["reject-eval", "--model", model, "--test", probes,
                "--lambda", "0.2"]) == 0
    out = capsys.readouterr().out
    assert "abstain_rate=1" in out
    assert "chow_risk" not in out


def test_tune_command_and_model_output(tmp_path, capsys):
    train = tmp_path / "train.nuqe"
    model = tmp_path / "tuned.nuqm"
    assert run(["toy", "--name", "two_moons", "--n", "200", "--seed", "0",
                "--out", train]) == 0
    capsys.readouterr()
    assert run(["tune", "--train", train, "--kernel", "gaussian", "--folds", "4",
                "--knn", "16", "--grid-min", "0.05", "--grid-max", "1.0",
                "--grid-size", "5", "--seed", "0", "--out", model]) == 0
    out = capsys.readouterr().out
    assert sum(line.startswith("h=") for line in out.splitlines()) == 5
    assert "best_h=" in out
    assert model.exists()


def test_agreement_command(moons_model, tmp_path, capsys):
    train, model = moons_model
    test_set = tmp_path / "test.nuqe"
    preds = tmp_path / "preds.csv"
    assert run(["toy", "--name", "two_moons", "--n", "60", "--seed", "8",
                "--out", test_set]) == 0
    labels = read_embeddings(test_set).labels
    preds.write_text("\n".join(str(int(v)) for v in labels) + "\n")
    capsys.readouterr()
    assert run(["agreement", "--model", model, "--test", test_set,
                "--external-preds", preds]) == 0
    out = capsys.readouterr().out
    value = float(out.split("agreement=")[1].split()[0])
    assert value >= 0.9


def test_oracle_output(tmp_path):
    data = tmp_path / "g3.nuqe"
    oracle = tmp_path / "g3_oracle.csv"
    assert run(["toy", "--name", "gauss3_1d", "--n", "50", "--seed", "0",
                "--out", data, "--oracle-out", oracle]) == 0
    header, rows = read_csv_rows(oracle)
    assert header == ["x", "eta", "density"]
    assert len(rows) == 50
    for r in rows:
        assert 0.0 <= float(r[1]) <= 1.0


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.nuqe"
    bad.write_bytes(b"XXXXXXXXXXXXXXXXXXXXXX")
    model = tmp_path / "nope.nuqm"
    # parse error -> 2
    assert run(["fit", "--train", bad, "--bandwidth", "0.5", "--out", model]) == 2
    # missing file -> 2
    assert run(["score", "--model", tmp_path / "missing.nuqm",
                "--input", bad, "--out", tmp_path / "s.csv"]) == 2
    # bad flag value -> 4
    assert run(["toy", "--name", "hypercube", "--n", "10", "--out", bad]) == 4
    # oracle requested for a toy without one -> 4
    assert run(["toy", "--name", "two_moons", "--n", "10", "--out",
                tmp_path / "m.nuqe", "--oracle-out", tmp_path / "o.csv"]) == 4
    # config error: lambda outside (0, 1) -> 4
    train = tmp_path / "train.nuqe"
    model2 = tmp_path / "m.nuqm"
    assert run(["toy", "--name", "two_moons", "--n", "40", "--out", train]) == 0
    assert run(["fit", "--train", train, "--bandwidth", "0.3", "--out", model2]) == 0
    assert run(["reject-eval", "--model", model2, "--test", train,
                "--lambda", "1.5"]) == 4
    capsys.readouterr()


def test_config_file_presets_flags(tmp_path, capsys):
    train = tmp_path / "train.nuqe"
    model = tmp_path / "m.nuqm"
    config = tmp_path / "nuq.conf"
    assert run(["toy", "--name", "two_moons", "--n", "80", "--seed", "0",
                "--out", train]) == 0
    config.write_text("bandwidth = 0.4\nkernel = logistic  # comment\nknn.k = 8\n")
    capsys.readouterr()
    assert run(["fit", "--train", train, "--config", config, "--out", model]) == 0
    from nuq.storage import load_model

    loaded = load_model(model)
    assert loaded.kernel.kind == "logistic"
    assert loaded.kernel.bandwidth == 0.4
    assert loaded.index_cfg.neighbors == 8
    # explicit flag overrides the config file
    assert run(["fit", "--train", train, "--config", config,
                "--bandwidth", "0.7", "--out", model]) == 0
    assert load_model(model).kernel.bandwidth == 0.7
    # unknown config key -> 4
    config.write_text("bandwith = 0.4\n")
    assert run(["fit", "--train", train, "--config", config, "--out", model]) == 4
