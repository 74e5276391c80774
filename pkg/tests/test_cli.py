import json

import numpy as np
import pytest

from p3dc.cli import run


def synth_args(out, preset=None, **flags):
    argv = ["synth", "-o", str(out)]
    if preset:
        argv += ["--preset", preset]
    defaults = {
        "dim": 8, "base-classes": 5, "novel-classes": 5,
        "samples-per-class": 10, "seed": 3,
    }
    defaults.update(flags)
    for name, value in defaults.items():
        argv += [f"--{name}", str(value)]
    return argv


@pytest.fixture()
def tiny_store(tmp_path):
    store = tmp_path / "store"
    assert run(synth_args(store)) == 0
    return store


class TestSynthAndValidate:
    def test_synth_then_validate(self, tmp_path, capsys):
        store = tmp_path / "store"
        assert run(synth_args(store, preset="separable")) == 0
        assert run(["validate", str(store)]) == 0
        out = capsys.readouterr().out
        assert "store OK" in out
        assert "split base" in out and "split novel" in out

    def test_validate_corrupt_store(self, tiny_store, capsys):
        binary = tiny_store / "novel.bin"
        binary.write_bytes(binary.read_bytes()[:-7])
        assert run(["validate", str(tiny_store)]) == 1
        assert "error_code: format" in capsys.readouterr().err

    def test_validate_missing_store(self, tmp_path, capsys):
        assert run(["validate", str(tmp_path / "nope")]) == 1
        assert "error_code: format" in capsys.readouterr().err


class TestEval:
    def test_separable_l2n_is_perfect(self, tmp_path, capsys):
        store = tmp_path / "store"
        run(synth_args(store, preset="separable"))
        code = run([
            "eval", str(store), "--mode", "l2n", "--tasks", "10",
            "--queries", "4", "--seed", "1", "--threads", "1",
        ])
        assert code == 0
        assert "accuracy: 100.00%" in capsys.readouterr().out

    def test_triangle_violation_exits_1_with_usage(self, tiny_store, capsys):
        code = run([
            "eval", str(tiny_store), "--mode", "p3dc",
            "--alpha", "0.7", "--beta", "0.5", "--tasks", "2",
        ])
        assert code == 1
        err = capsys.readouterr().err
        assert "error_code: config" in err
        assert "alpha + beta" in err

    def test_reduction_chain_json_identical(self, tiny_store, tmp_path, capsys):
        common = ["--tasks", "8", "--queries", "3", "--seed", "5",
                  "--proto", "average", "--threads", "1"]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(["eval", str(tiny_store), "--mode", "p3dc", "--alpha", "0",
                    "--beta", "0", "--json", str(a)] + common) == 0
        assert run(["eval", str(tiny_store), "--mode", "l2n",
                    "--json", str(b)] + common) == 0
        ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
        assert ja["per_task_accuracy"] == jb["per_task_accuracy"]
        assert ja["mean_accuracy"] == jb["mean_accuracy"]
        assert ja["ci95_halfwidth"] == jb["ci95_halfwidth"]

    def test_calib_flags_rejected_for_plain_modes(self, tiny_store, capsys):
        code = run(["eval", str(tiny_store), "--mode", "l2n", "--alpha", "0.5"])
        assert code == 1
        assert "error_code: config" in capsys.readouterr().err

    def test_fractional_lambda_needs_nonneg_store(self, tmp_path, capsys):
        store = tmp_path / "store"
        run(synth_args(store) + ["--no-nonneg"])
        code = run(["eval", str(store), "--mode", "p3dc", "--tasks", "2"])
        assert code == 1
        assert "clamp" in capsys.readouterr().err
        # and the clamping escape hatch works
        code = run(["eval", str(store), "--mode", "p3dc", "--tasks", "2",
                    "--queries", "2", "--clamp-negative", "--threads", "1"])
        assert code == 0

    def test_env_var_supplies_store(self, tiny_store, monkeypatch, capsys):
        monkeypatch.setenv("P3DC_STORE", str(tiny_store))
        assert run(["validate"]) == 0
        assert "store OK" in capsys.readouterr().out

    def test_missing_store_is_config_error(self, monkeypatch, capsys):
        monkeypatch.delenv("P3DC_STORE", raising=False)
        assert run(["validate"]) == 1
        assert "error_code: config" in capsys.readouterr().err

    def test_unknown_flag_exits_1(self, tiny_store, capsys):
        assert run(["eval", str(tiny_store), "--mode", "l2n", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err


class TestPrototypes:
    def test_writes_prototype_json(self, tiny_store, tmp_path):
        out = tmp_path / "protos.json"
        assert run(["prototypes", str(tiny_store), "-o", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["dim"] == 8
        assert len(payload["prototypes"]) == 5
        assert len(payload["global_mean"]) == 8
        # f32 values survive the JSON round trip exactly
        assert all(
            np.float32(v) == np.float32(w)
            for row in payload["prototypes"] for v, w in zip(row, row)
        )


class TestSweep:
    def test_sweep_writes_heatmap_and_json(self, tiny_store, tmp_path, capsys):
        heat, summary = tmp_path / "heat.csv", tmp_path / "sweep.json"
        code = run([
            "sweep", str(tiny_store), "--step", "0.5", "--tasks", "6",
            "--queries", "3", "--seed", "2", "--threads", "1",
            "--heatmap", str(heat), "--json", str(summary),
        ])
        assert code == 0
        lines = heat.read_text().splitlines()
        assert lines[0] == "alpha,beta,accuracy,ci95"
        assert len(lines) == 1 + 6
        payload = json.loads(summary.read_text())
        assert len(payload["entries"]) == 6
        assert "best (alpha, beta)" in capsys.readouterr().out

    def test_rerun_heatmap_byte_identical(self, tiny_store, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["sweep", str(tiny_store), "--step", "0.5", "--tasks", "5",
                "--queries", "3", "--seed", "4", "--threads", "2"]
        assert run(argv + ["--heatmap", str(a)]) == 0
        assert run(argv + ["--heatmap", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
