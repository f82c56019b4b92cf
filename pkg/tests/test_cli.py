import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from hyperkg.cli import PRESETS, main


@pytest.fixture(scope="module")
def wd_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("wd")
    result = CliRunner().invoke(main, ["gen-dataset", "--rules", "a", "--seed", "0", "--out", str(out)])
    assert result.exit_code == 0, result.output
    return out


def run_cli(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


FAST_TRAIN = ["--dim", "4", "--max-epochs", "4", "--eval-every", "2", "--seed", "1",
              "--learning-rate", "0.05", "--margin", "1.0", "--negs-entity", "1",
              "--negs-relation", "1", "--corruption", "uniform"]


class TestGenDataset:
    def test_writes_splits_and_provenance(self, wd_dir):
        for name in ("train.txt", "valid.txt", "test.txt", "provenance.json"):
            assert (wd_dir / name).exists()

    def test_same_seed_identical_files(self, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("gen-dataset", "--seed", 3, "--out", d1).exit_code == 0
        assert run_cli("gen-dataset", "--seed", 3, "--out", d2).exit_code == 0
        for name in ("train.txt", "valid.txt", "test.txt", "provenance.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_rules_ab_profile(self, tmp_path):
        out = tmp_path / "wdpp"
        res = run_cli("gen-dataset", "--rules", "ab", "--seed", 0, "--out", out)
        assert res.exit_code == 0
        payload = json.loads((out / "provenance.json").read_text())
        assert payload["rules"] == ["a", "b"]
        assert payload["counts"]["valid"] == 40


class TestTrain:
    def test_full_run_artifacts(self, wd_dir, tmp_path):
        out = tmp_path / "run"
        res = run_cli("train", "--data-dir", wd_dir, "--out", out, *FAST_TRAIN)
        assert res.exit_code == 0, res.output
        for name in ("training_log.csv", "best.ckpt", "last.ckpt", "eval_report.json", "config.json"):
            assert (out / name).exists()
        stdout_json = json.loads(res.stdout.strip().splitlines()[-1])
        assert set(stdout_json) == {"mrr", "hits", "n_queries"}

    def test_missing_data_dir_exit_3(self, tmp_path):
        res = run_cli("train", "--data-dir", tmp_path / "absent", "--out", tmp_path / "o", *FAST_TRAIN)
        assert res.exit_code == 3

    def test_unknown_preset_exit_2(self, wd_dir, tmp_path):
        res = run_cli("train", "--data-dir", wd_dir, "--out", tmp_path / "o", "--preset", "nope")
        assert res.exit_code == 2

    def test_bad_config_file_exit_2(self, wd_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        res = run_cli("train", "--data-dir", wd_dir, "--out", tmp_path / "o", "--config", cfg)
        assert res.exit_code == 2

    def test_unknown_config_key_exit_2(self, wd_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"learning_rte": 0.1}))
        res = run_cli("train", "--data-dir", wd_dir, "--out", tmp_path / "o", "--config", cfg)
        assert res.exit_code == 2

    def test_precedence_flags_over_config_over_preset(self, wd_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        # preset wd sets margin 7.0 / lr 0.8; config file overrides margin;
        # the flag overrides the learning rate
        cfg.write_text(json.dumps({"margin": 2.0, "max_epochs": 2, "dim": 4, "eval_every": 2}))
        out = tmp_path / "run"
        res = run_cli(
            "train", "--data-dir", wd_dir, "--out", out,
            "--preset", "wd", "--config", cfg, "--learning-rate", "0.05",
        )
        assert res.exit_code == 0, res.output
        resolved = json.loads((out / "config.json").read_text())
        assert resolved["margin"] == 2.0  # config file beats preset
        assert resolved["learning_rate"] == 0.05  # flag beats preset
        assert resolved["negs_entity"] == 1  # preset survives where not overridden
        assert resolved["corruption"] == "uniform"

    def test_determinism_bitwise(self, wd_dir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            res = run_cli("train", "--data-dir", wd_dir, "--out", out, *FAST_TRAIN)
            assert res.exit_code == 0
            outs.append(out)
        for name in ("training_log.csv", "eval_report.json", "best.ckpt.entities.f64",
                     "last.ckpt.entities.f64", "best.ckpt.relations.f64"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestEval:
    def test_eval_roundtrip_and_determinism(self, wd_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli("train", "--data-dir", wd_dir, "--out", out, *FAST_TRAIN).exit_code == 0
        res1 = run_cli("eval", out / "best.ckpt", "--data-dir", wd_dir, "--ks", "1,3,10")
        res2 = run_cli("eval", out / "best.ckpt", "--data-dir", wd_dir, "--ks", "1,3,10")
        assert res1.exit_code == 0, res1.output
        assert res1.stdout == res2.stdout
        payload = json.loads(res1.stdout)
        assert set(payload["hits"]) == {"1", "3", "10"}

    def test_per_query_csv(self, wd_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli("train", "--data-dir", wd_dir, "--out", out, *FAST_TRAIN).exit_code == 0
        csv_path = tmp_path / "per_query.csv"
        res = run_cli("eval", out / "best.ckpt", "--data-dir", wd_dir, "--per-query", csv_path)
        assert res.exit_code == 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "subject,relation,object,side,rank"
        assert len(lines) == 1 + 2 * 25

    def test_vocab_mismatch_exit_5(self, wd_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli("train", "--data-dir", wd_dir, "--out", out, *FAST_TRAIN).exit_code == 0
        other = tmp_path / "other"
        assert run_cli("gen-dataset", "--seed", 9, "--out", other).exit_code == 0
        res = run_cli("eval", out / "best.ckpt", "--data-dir", other)
        assert res.exit_code == 5

    def test_bad_ks_exit_2(self, wd_dir, tmp_path):
        out = tmp_path / "run"
        assert run_cli("train", "--data-dir", wd_dir, "--out", out, *FAST_TRAIN).exit_code == 0
        res = run_cli("eval", out / "best.ckpt", "--data-dir", wd_dir, "--ks", "ten")
        assert res.exit_code == 2

    def test_missing_checkpoint_exit_3(self, wd_dir, tmp_path):
        res = run_cli("eval", tmp_path / "none.ckpt", "--data-dir", wd_dir)
        assert res.exit_code == 3


class TestVerify:
    def test_small_sweep_passes(self, tmp_path):
        report_path = tmp_path / "verify.json"
        res = run_cli("verify", "--samples", 500, "--dims", "2,5", "--regions", 3,
                      "--seed", 0, "--out", report_path)
        assert res.exit_code == 0, res.output
        payload = json.loads(report_path.read_text())
        assert all(entry["violations"] == 0 for entry in payload)

    def test_deterministic_output(self):
        r1 = run_cli("verify", "--samples", 300, "--dims", "2", "--regions", 2, "--seed", 1)
        r2 = run_cli("verify", "--samples", 300, "--dims", "2", "--regions", 2, "--seed", 1)
        assert r1.stdout == r2.stdout

    def test_bad_dims_exit_2(self):
        assert run_cli("verify", "--dims", "two").exit_code == 2


class TestAnalyzeDegrees:
    def test_writes_csv_and_sidecar(self, wd_dir, tmp_path):
        out_csv = tmp_path / "degrees.csv"
        res = run_cli("analyze-degrees", "--data-dir", wd_dir, "--out", out_csv)
        assert res.exit_code == 0, res.output
        assert out_csv.read_text().splitlines()[0] == "degree,pdf"
        sidecar = json.loads((tmp_path / "degrees.json").read_text())
        assert sidecar["n_facts"] == 600
        assert sidecar["alpha_hat"] > 1.0

    def test_missing_dir_exit_3(self, tmp_path):
        res = run_cli("analyze-degrees", "--data-dir", tmp_path / "gone", "--out", tmp_path / "d.csv")
        assert res.exit_code == 3


class TestExitCodes:
    def test_error_to_exit_code_mapping(self):
        import hyperkg.cli as cli
        from hyperkg.exceptions import (
            CheckpointMismatch,
            ConfigError,
            DataError,
            NumericError,
        )

        for exc, code in (
            (ConfigError("x"), 2),
            (DataError("x"), 3),
            (NumericError("x"), 4),
            (CheckpointMismatch("x"), 5),
        ):
            with pytest.raises(SystemExit) as err:
                cli._fail(exc)
            assert err.value.code == code


class TestPresets:
    def test_table_rows_encoded(self):
        wn = PRESETS["wn18rr"]
        assert (wn["negs_entity"], wn["negs_relation"]) == (10, 0)
        assert (wn["learning_rate"], wn["reg_weight"], wn["margin"]) == (0.01, 0.8, 1.0)
        assert wn["dim"] == 100
        fb = PRESETS["fb15k237"]
        assert (fb["negs_entity"], fb["margin"], fb["reg_weight"]) == (5, 0.5, 0.2)
        wd = PRESETS["wd"]
        assert (wd["learning_rate"], wd["margin"], wd["corruption"]) == (0.8, 7.0, "uniform")
        assert PRESETS["wdpp"]["learning_rate"] == 0.1
        assert PRESETS["wn18rr-mobius"]["variant"] == "mobius-add"
        assert PRESETS["wn18rr-mobius"]["reg_weight"] == 0.0
