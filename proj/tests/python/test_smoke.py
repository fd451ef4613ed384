import math
import os

import numpy as np
import pytest

import ocacnn


def tiny(data_dir, **extra):
    cfg = {
        "arch.preset": "tiny",
        "data.root": str(data_dir),
        "data.identities": "3",
        "data.samples": "20",
        "train.batch": "8",
        "train.epochs": "2",
        "train.lr": "1e-3",
    }
    cfg.update(extra)
    return cfg


def test_defaults():
    cfg = ocacnn.resolved_config()
    assert cfg["pseudo.mu"] == "0.0"
    assert cfg["pseudo.sigma"] == "0.01"
    assert cfg["loss.lambda_r"] == "1.0"
    assert cfg["train.lr"] == "1e-4"
    assert cfg["train.batch"] == "64"
    with pytest.raises(ocacnn.ConfigError):
        ocacnn.resolved_config({"no.such.key": "1"})


def test_auroc():
    assert ocacnn.auroc([0.9, 0.8], [0.7, 0.85]) == 0.75
    assert ocacnn.auroc([1.0, 1.0], [1.0]) == 0.5


def test_gradcheck():
    r = ocacnn.gradcheck(1)
    assert r["max_rel_error"] <= 1e-5
    assert r["coords_checked"] > 0


def test_train_and_score(tmp_path):
    data = tmp_path / "data"
    code, _, err = ocacnn.gen_data(tiny(data), data)
    assert code == 0, err
    code, _, err = ocacnn.train(tiny(data, **{"train.target": "id00"}), tmp_path / "run")
    assert code == 0, err

    rows = (tmp_path / "run" / "loss.tsv").read_text().splitlines()
    assert rows[0] == "step\tL_c\tL_r\tL_t"
    for row in rows[1:]:
        _, lc, lr, lt = (float(x) for x in row.split("\t"))
        assert math.isclose(lc + lr, lt, abs_tol=1e-6)

    ckpt = tmp_path / "run" / "final.ock"
    images = np.random.default_rng(0).uniform(-1, 1, size=(5, 3, 4, 4)).astype(np.float32)
    feats = ocacnn.extract_features(ckpt, images)
    assert feats.shape == (5, 8)
    scores = ocacnn.score(ckpt, images)
    assert len(scores) == 5 and all(0.0 < s < 1.0 for s in scores)
    rec = ocacnn.reconstruct(ckpt, images)
    assert rec.shape == images.shape and np.all(np.abs(rec) < 1.0)

    code, out, err = ocacnn.evaluate(tiny(data), ckpt, tmp_path / "eval")
    assert code == 0, err
    assert "AUROC" in out

    with pytest.raises(ocacnn.ShapeError):
        ocacnn.extract_features(ckpt, images[:, :, :2, :2])


def test_gen_data_rejects_one_identity(tmp_path):
    code, _, err = ocacnn.gen_data(tiny(tmp_path, **{"data.identities": "1"}), tmp_path / "d")
    assert code != 0
    assert "need ≥ 2 identities" in err
