"""CLI end-to-end runs in a temp workspace, plus exit-code contracts."""

import os

import numpy as np
import pytest

from sfnet.cli import parse_config_file, run_cli
from sfnet.data import load_pgm, save_pgm
from sfnet.network import NetworkConfig, build
from sfnet.checkpoint import save_checkpoint
from sfnet.tensor import Tensor

TINY_FLAGS = ["--width", "8", "--enc-blocks", "1,1", "--mid-blocks", "1",
              "--dec-blocks", "1,1"]


def _synth(tmp_path, count=3, size=16):
    out = str(tmp_path / "corpus")
    code = run_cli(["synth", "--out", out, "--count", str(count),
                    "--size", str(size), "--pitch", "8", "--seed", "1"])
    assert code == 0
    return out


class TestSynth:
    def test_writes_images_and_manifest(self, tmp_path):
        out = _synth(tmp_path)
        files = sorted(os.listdir(out))
        assert "manifest.tsv" in files
        assert sum(f.endswith(".pgm") for f in files) == 3
        img = load_pgm(os.path.join(out, "img_00000.pgm"))
        assert img.shape == (1, 1, 16, 16)

    def test_deterministic(self, tmp_path):
        a = _synth(tmp_path / "a")
        b = _synth(tmp_path / "b")
        for name in ("img_00000.pgm", "img_00002.pgm"):
            ia = load_pgm(os.path.join(a, name))
            ib = load_pgm(os.path.join(b, name))
            np.testing.assert_array_equal(ia.data, ib.data)


class TestTrainEvalDenoise:
    def test_pipeline(self, tmp_path, capsys):
        corpus = _synth(tmp_path, count=2, size=16)
        run_dir = str(tmp_path / "run")
        code = run_cli(["train", "--data", os.path.join(corpus, "manifest.tsv"),
                        "--out", run_dir, *TINY_FLAGS,
                        "--iters", "3", "--batch", "2", "--crop", "16",
                        "--checkpoint-every", "2", "--seed", "0"])
        assert code == 0
        for name in ("checkpoint.bin", "loss_log.tsv", "loss_curve.png"):
            assert os.path.exists(os.path.join(run_dir, name))

        eval_dir = str(tmp_path / "eval")
        code = run_cli(["eval", "--ckpt", os.path.join(run_dir, "checkpoint.bin"),
                        "--data", os.path.join(corpus, "manifest.tsv"),
                        "--out", eval_dir, "--sigma", "25"])
        assert code == 0
        for name in ("report.txt", "report.kv", "report.png"):
            assert os.path.exists(os.path.join(eval_dir, name))

        out_pgm = str(tmp_path / "denoised.pgm")
        code = run_cli(["denoise", "--ckpt", os.path.join(run_dir, "checkpoint.bin"),
                        "--in", os.path.join(corpus, "img_00000.pgm"),
                        "--out", out_pgm])
        assert code == 0
        assert load_pgm(out_pgm).shape == (1, 1, 16, 16)

    def test_identity_checkpoint_denoise_roundtrip(self, tmp_path):
        model = build(NetworkConfig(width=8, enc_blocks=(1, 1), mid_blocks=1,
                                    dec_blocks=(1, 1)), seed=0)
        ckpt = str(tmp_path / "fresh.bin")
        save_checkpoint(ckpt, model)
        rng = np.random.default_rng(0)
        src = str(tmp_path / "a.pgm")
        save_pgm(Tensor(rng.random((1, 1, 12, 12)).astype(np.float32)), src)
        dst = str(tmp_path / "b.pgm")
        assert run_cli(["denoise", "--ckpt", ckpt, "--in", src, "--out", dst]) == 0
        a = load_pgm(src)
        b = load_pgm(dst)
        # identity model output differs only by PGM requantization
        assert np.max(np.abs(a.data - b.data)) <= 1.0 / 255.0 + 1e-6


class TestGradcheckCommand:
    def test_all_pass(self, capsys):
        code = run_cli(["gradcheck", "--seed", "7", "--mode", "f64",
                        "--max-coords", "4"])
        out = capsys.readouterr().out
        assert code == 0
        assert "FAIL" not in out
        assert out.count("PASS") >= 30


class TestMacsCommand:
    def test_default_near_reference(self, capsys):
        assert run_cli(["macs", "--size", "256"]) == 0
        out = capsys.readouterr().out
        total_line = [l for l in out.splitlines() if l.startswith("total")][0]
        total = int(total_line.split()[1])
        assert 69.1e9 <= total <= 103.6e9

    def test_echo_roundtrip(self, tmp_path, capsys):
        assert run_cli(["macs", "--size", "64", *TINY_FLAGS]) == 0
        echo = [l for l in capsys.readouterr().out.splitlines()
                if " = " in l and not l.startswith("#")]
        cfg_path = str(tmp_path / "echo.cfg")
        with open(cfg_path, "w") as fh:
            fh.write("\n".join(l for l in echo if not l.startswith("size")) + "\n")
        assert run_cli(["macs", "--size", "64", "--config", cfg_path]) == 0
        again = [l for l in capsys.readouterr().out.splitlines()
                 if " = " in l and not l.startswith("#")]
        assert echo == again


class TestAblateCommand:
    def test_modules_grid(self, tmp_path, capsys):
        out = str(tmp_path / "ablate")
        code = run_cli(["ablate", "--out", out, "--iters", "2", "--width", "8",
                        "--image-size", "16", "--grids", "modules"])
        assert code == 0
        with open(os.path.join(out, "ablation.tsv")) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "grid\tvariant\tpsnr_db\tssim\tfinal_loss"
        assert len(lines) == 5
        assert os.path.exists(os.path.join(out, "ablation.png"))

    def test_unknown_grid_rejected(self, tmp_path):
        assert run_cli(["ablate", "--out", str(tmp_path), "--grids", "bogus"]) == 1


class TestExitCodes:
    def test_unknown_flag(self):
        assert run_cli(["macs", "--bogus-flag", "1"]) == 1

    def test_unknown_subcommand(self):
        assert run_cli(["frobnicate"]) == 1

    def test_missing_manifest(self, tmp_path):
        assert run_cli(["train", "--data", str(tmp_path / "none.tsv"),
                        "--out", str(tmp_path / "o")]) == 1

    def test_bad_pgm_is_runtime_error(self, tmp_path):
        model = build(NetworkConfig(width=8, enc_blocks=(1, 1), mid_blocks=1,
                                    dec_blocks=(1, 1)), seed=0)
        ckpt = str(tmp_path / "m.bin")
        save_checkpoint(ckpt, model)
        bad = str(tmp_path / "bad.pgm")
        with open(bad, "wb") as fh:
            fh.write(b"P2\n2 2\n255\n0 0 0 0\n")
        assert run_cli(["denoise", "--ckpt", ckpt, "--in", bad,
                        "--out", str(tmp_path / "o.pgm")]) == 2

    def test_corrupt_checkpoint_is_runtime_error(self, tmp_path):
        ckpt = str(tmp_path / "bad.bin")
        with open(ckpt, "wb") as fh:
            fh.write(b"SFFNgarbagegarbagegarbage")
        rng = np.random.default_rng(0)
        src = str(tmp_path / "a.pgm")
        save_pgm(Tensor(rng.random((1, 1, 8, 8)).astype(np.float32)), src)
        assert run_cli(["denoise", "--ckpt", ckpt, "--in", src,
                        "--out", str(tmp_path / "o.pgm")]) == 2

    def test_unknown_config_key(self, tmp_path):
        cfg = str(tmp_path / "c.cfg")
        with open(cfg, "w") as fh:
            fh.write("not_a_key = 3\n")
        assert run_cli(["macs", "--config", cfg]) == 1


class TestConfigFile:
    def test_parse_comments_and_spacing(self, tmp_path):
        cfg = str(tmp_path / "c.cfg")
        with open(cfg, "w") as fh:
            fh.write("# a comment\nwidth = 16  # trailing\n\nmid_blocks=2\n")
        values = parse_config_file(cfg)
        assert values == {"width": "16", "mid_blocks": "2"}

    def test_malformed_line(self, tmp_path):
        cfg = str(tmp_path / "c.cfg")
        with open(cfg, "w") as fh:
            fh.write("just words\n")
        from sfnet.errors import ConfigError
        with pytest.raises(ConfigError):
            parse_config_file(cfg)

    def test_flags_override_file(self, tmp_path, capsys):
        cfg = str(tmp_path / "c.cfg")
        with open(cfg, "w") as fh:
            fh.write("width = 16\n")
        assert run_cli(["macs", "--size", "64", "--config", cfg,
                        "--width", "8", "--enc-blocks", "1,1",
                        "--mid-blocks", "1", "--dec-blocks", "1,1"]) == 0
        out = capsys.readouterr().out
        assert "width = 8" in out
