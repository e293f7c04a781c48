import os
import struct
from pathlib import Path

import numpy as np
import pytest

from survmix.cli import (
    CHECKPOINT_MAGIC,
    load_checkpoint,
    main,
    parse_config,
    save_checkpoint,
    train_config_from,
)
from survmix.datagen import PreprocessStats, load_csv
from survmix.errors import ConfigError, FormatError
from survmix.model import TrainConfig, init_params


FAST_TRAIN = """
latent_dim = 3
num_clusters = 2
epochs = 3
batch_size = 64
enc_hidden = 16
dec_hidden = 16
num_samples = 150
num_features = 8
test_fraction = 0.3
seed = 5
"""


def write_config(tmp_path, text=FAST_TRAIN, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfigParsing:
    def test_values_and_comments(self, tmp_path):
        p = write_config(tmp_path, "epochs = 7  # short run\n\n# comment only\nseed=3\n")
        values = parse_config(p)
        assert values["epochs"] == "7"
        assert values["seed"] == "3"
        assert values["latent_dim"] == "16"  # default

    def test_unknown_key_reports_line(self, tmp_path):
        p = write_config(tmp_path, "epochs = 2\nbogus_key = 1\n")
        with pytest.raises(ConfigError, match=":2"):
            parse_config(p)

    def test_missing_equals_sign(self, tmp_path):
        p = write_config(tmp_path, "epochs 2\n")
        with pytest.raises(ConfigError, match="key = value"):
            parse_config(p)

    def test_defaults_noticed_on_stderr(self, tmp_path, capsys):
        parse_config(write_config(tmp_path, "epochs = 1\n"))
        err = capsys.readouterr().err
        assert "latent_dim" in err and "default" in err

    def test_train_config_round_trip(self, tmp_path):
        values = parse_config(write_config(tmp_path))
        config = train_config_from(values)
        assert config.latent_dim == 3
        assert config.enc_hidden == (16,)
        assert config.seed == 5
        assert train_config_from(values, seed_override=9).seed == 9

    def test_bad_value_type(self, tmp_path):
        values = parse_config(write_config(tmp_path, "epochs = three\n"))
        with pytest.raises(ConfigError, match="bad configuration value"):
            train_config_from(values)


class TestCheckpoint:
    def roundtrip(self, tmp_path, gmm_prior=True):
        rng = np.random.default_rng(0)
        config = TrainConfig(latent_dim=3, num_clusters=2, enc_hidden=(6,),
                             dec_hidden=(6,), gmm_prior=gmm_prior)
        params = init_params(5, config, rng)
        stats = PreprocessStats(
            max_time=12.5,
            feature_mean=rng.standard_normal(5),
            feature_std=rng.uniform(0.5, 2.0, 5),
        )
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(params, stats, {"epochs": "3"}, path)
        return params, stats, load_checkpoint(path)

    def test_round_trip_exact(self, tmp_path):
        params, stats, (loaded, lstats, meta) = self.roundtrip(tmp_path)
        np.testing.assert_array_equal(loaded.means, params.means)
        np.testing.assert_array_equal(loaded.betas, params.betas)
        np.testing.assert_array_equal(loaded.mixture_logits, params.mixture_logits)
        for w_a, w_b in zip(loaded.encoder.weights, params.encoder.weights):
            np.testing.assert_array_equal(w_a, w_b)
        assert loaded.encoder.activations == params.encoder.activations
        assert loaded.shape == params.shape
        assert lstats.max_time == stats.max_time
        np.testing.assert_array_equal(lstats.feature_mean, stats.feature_mean)
        assert meta["epochs"] == "3"

    def test_round_trip_plain_prior(self, tmp_path):
        params, _, (loaded, _, _) = self.roundtrip(tmp_path, gmm_prior=False)
        assert loaded.gmm_prior is False
        assert loaded.num_clusters == 1

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(FormatError, match="magic"):
            load_checkpoint(str(p))

    def test_bad_version(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(CHECKPOINT_MAGIC + struct.pack("<I", 99) + bytes(16))
        with pytest.raises(FormatError, match="version 99"):
            load_checkpoint(str(p))

    def test_truncated_tensor_reports_offset(self, tmp_path):
        params, stats, _ = self.roundtrip(tmp_path)
        path = str(tmp_path / "model.ckpt")
        data = Path(path).read_bytes()
        Path(path).write_bytes(data[:-20])
        with pytest.raises(FormatError, match="truncated"):
            load_checkpoint(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One simulate -> train -> predict -> evaluate -> km-export run."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "run.cfg"
    cfg.write_text(FAST_TRAIN)
    paths = {
        "root": root,
        "cfg": str(cfg),
        "data": str(root / "data"),
        "ckpt": str(root / "model.ckpt"),
        "pred": str(root / "pred.csv"),
        "report": str(root / "report.txt"),
        "km": str(root / "km.csv"),
    }
    assert main(["simulate", "--kind", "synthetic", "--config", paths["cfg"],
                 "--out", paths["data"]]) == 0
    assert main(["train", "--data", os.path.join(paths["data"], "train.csv"),
                 "--config", paths["cfg"], "--out", paths["ckpt"]]) == 0
    assert main(["predict", "--checkpoint", paths["ckpt"],
                 "--data", os.path.join(paths["data"], "test.csv"),
                 "--out", paths["pred"]]) == 0
    assert main(["evaluate", "--predictions", paths["pred"],
                 "--data", os.path.join(paths["data"], "test.csv"),
                 "--out", paths["report"]]) == 0
    assert main(["km-export", "--predictions", paths["pred"],
                 "--data", os.path.join(paths["data"], "test.csv"),
                 "--out", paths["km"]]) == 0
    return paths


class TestPipeline:
    def test_simulate_outputs(self, pipeline):
        train = load_csv(os.path.join(pipeline["data"], "train.csv"))
        test = load_csv(os.path.join(pipeline["data"], "test.csv"))
        assert len(train) + len(test) == 150
        assert train.labels is not None
        manifest = Path(os.path.join(pipeline["data"], "manifest")).read_text()
        assert "kind = synthetic" in manifest
        assert "seed = 5" in manifest

    def test_train_outputs(self, pipeline):
        assert os.path.exists(pipeline["ckpt"])
        trace = Path(pipeline["ckpt"] + ".trace.csv").read_text().splitlines()
        assert trace[0] == "epoch,elbo"
        assert len(trace) == 4  # header + 3 epochs

    def test_prediction_columns(self, pipeline):
        lines = Path(pipeline["pred"]).read_text().splitlines()
        header = lines[0].split(",")
        assert header[:2] == ["row_id", "cluster"]
        assert "p_0" in header and "p_1" in header
        assert "pred_time" in header and "latent_0" in header
        test = load_csv(os.path.join(pipeline["data"], "test.csv"))
        assert len(lines) - 1 == len(test)
        # predicted times come back in raw units (test times are raw too)
        t_hat = np.array([float(l.split(",")[header.index("pred_time")])
                          for l in lines[1:]])
        assert np.all(t_hat > 0)

    def test_evaluate_report(self, pipeline):
        report = Path(pipeline["report"]).read_text()
        for key in ("ci =", "rae_nc =", "acc =", "nmi =", "ari ="):
            assert key in report

    def test_km_export_long_format(self, pipeline):
        lines = Path(pipeline["km"]).read_text().splitlines()
        assert lines[0] == "cluster,time,survival"
        values = [line.split(",") for line in lines[1:]]
        assert values, "expected at least one KM step"
        survs = [float(v[2]) for v in values]
        assert all(0.0 <= s <= 1.0 for s in survs)


class TestCliErrors:
    def test_missing_file_exits_nonzero(self, tmp_path, capsys):
        code = main(["train", "--data", str(tmp_path / "nope.csv"),
                     "--config", str(tmp_path / "nope.cfg"),
                     "--out", str(tmp_path / "out.ckpt")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_config_key_exits_nonzero(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not_a_key = 1\n")
        code = main(["simulate", "--kind", "synthetic", "--config", str(cfg),
                     "--out", str(tmp_path / "d")])
        assert code == 1
        assert "not_a_key" in capsys.readouterr().err

    def test_predict_feature_width_mismatch(self, pipeline, tmp_path, capsys):
        bad = tmp_path / "narrow.csv"
        bad.write_text("feature_0,time,event\n1.0,2.0,1\n")
        code = main(["predict", "--checkpoint", pipeline["ckpt"],
                     "--data", str(bad), "--out", str(tmp_path / "p.csv")])
        assert code == 1
        assert "features" in capsys.readouterr().err

    def test_evaluate_row_mismatch(self, pipeline, tmp_path, capsys):
        pred = tmp_path / "pred.csv"
        pred.write_text("row_id,cluster,pred_time\n0,0,1.0\n")
        code = main(["evaluate", "--predictions", str(pred),
                     "--data", os.path.join(pipeline["data"], "test.csv"),
                     "--out", str(tmp_path / "r.txt")])
        assert code == 1
        assert "align" in capsys.readouterr().err


class TestDeterminism:
    def test_pipeline_byte_identical_across_runs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(FAST_TRAIN)

        def run(tag):
            d = tmp_path / tag
            d.mkdir()
            data = str(d / "data")
            ckpt = str(d / "model.ckpt")
            pred = str(d / "pred.csv")
            report = str(d / "report.txt")
            assert main(["simulate", "--kind", "synthetic", "--config",
                         str(cfg), "--out", data]) == 0
            assert main(["train", "--data", os.path.join(data, "train.csv"),
                         "--config", str(cfg), "--out", ckpt]) == 0
            assert main(["predict", "--checkpoint", ckpt,
                         "--data", os.path.join(data, "test.csv"),
                         "--out", pred]) == 0
            assert main(["evaluate", "--predictions", pred,
                         "--data", os.path.join(data, "test.csv"),
                         "--out", report]) == 0
            return {
                "train.csv": Path(os.path.join(data, "train.csv")).read_bytes(),
                "model.ckpt": Path(ckpt).read_bytes(),
                "pred.csv": Path(pred).read_bytes(),
                "report.txt": Path(report).read_bytes(),
            }

        a = run("a")
        b = run("b")
        for name in a:
            assert a[name] == b[name], f"{name} differs between identical runs"

    def test_seed_override_changes_results(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(FAST_TRAIN)
        for tag, seed in (("s1", "11"), ("s2", "12")):
            (tmp_path / tag).mkdir()
            assert main(["simulate", "--kind", "synthetic", "--config", str(cfg),
                         "--out", str(tmp_path / tag / "d"), "--seed", seed]) == 0
        a = Path(tmp_path / "s1" / "d" / "train.csv").read_text()
        b = Path(tmp_path / "s2" / "d" / "train.csv").read_text()
        assert a != b


class TestSurvMnistSimulate:
    def test_simulate_survmnist(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("num_samples = 200\nnum_clusters = 3\nseed = 1\n"
                       "test_fraction = 0.25\nrecon_loss = bce\n")
        out = str(tmp_path / "d")
        assert main(["simulate", "--kind", "survmnist", "--config", str(cfg),
                     "--out", out]) == 0
        train = load_csv(os.path.join(out, "train.csv"), feature_kind="binary")
        assert train.features.shape[1] == 10
        assert set(np.unique(train.labels)) <= {0, 1, 2}
