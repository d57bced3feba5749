"""Presets, run outputs, checkpoint/resume, sweep composition, CLI."""

import json

import numpy as np
import pytest

from memegrid import census, harness
from memegrid.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from memegrid.cli import main as cli_main
from memegrid.config import ConfigError, GridConfig, load_config


def _cfg(**kw):
    base = dict(rows=8, cols=8, steps=12, seed=1234)
    base.update(kw)
    return GridConfig(**base)


# --- presets -----------------------------------------------------------------

# (mutation, homogeneous init, memetic selection) per ablation row
PRESET_FLAG_TABLE = {
    "no_evolution": (False, False, False),
    "no_variation": (False, True, False),
    "no_mutation": (False, False, True),
    "no_skip": (True, True, True),
    "no_selection_hom": (True, True, False),
    "no_selection_het": (True, False, False),
    "simplified": (True, False, True),
    "baseline": (True, False, True),
}


def test_preset_flag_matrix():
    for name, (mut, same, sel) in PRESET_FLAG_TABLE.items():
        cfg = harness.apply_preset(_cfg(), name)
        assert cfg.mutation_on == mut, name
        assert cfg.homogeneous_init == same, name
        assert cfg.selection_on == sel, name


def test_preset_structural_flags():
    assert harness.apply_preset(_cfg(), "no_evolution").evolution_on is False
    assert harness.apply_preset(_cfg(), "no_skip").skip_connection_on is False
    simplified = harness.apply_preset(_cfg(), "simplified")
    assert (simplified.msg_len, simplified.msg_channels) == (1, 30)
    base = harness.apply_preset(_cfg(), "baseline")
    assert base.evolution_on and base.skip_connection_on
    assert (base.msg_len, base.msg_channels) == (10, 3)


def test_unknown_preset_lists_options():
    with pytest.raises(ConfigError) as err:
        harness.preset("nope")
    assert "baseline" in str(err.value)


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        GridConfig(rows=4, cols=8).validate()  # too small for radius 2
    with pytest.raises(ConfigError):
        GridConfig(steps=0).validate()
    with pytest.raises(ConfigError):
        GridConfig(msg_len=2, msg_channels=3).validate()  # not 30 symbols
    with pytest.raises(ConfigError):
        GridConfig(gamma_s=1.5).validate()
    with pytest.raises(ConfigError):
        GridConfig(buffer_capacity=10).validate()


def test_config_file_roundtrip(tmp_path):
    cfg = _cfg(gamma_s=0.25, task_on=True)
    path = tmp_path / "config.json"
    from memegrid.config import save_config
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_identity_hash_ignores_steps_only():
    a = _cfg(steps=10)
    assert a.identity_hash() == _cfg(steps=99).identity_hash()
    assert a.identity_hash() != _cfg(seed=5).identity_hash()
    assert a.identity_hash() != _cfg(gamma_s=0.5).identity_hash()


# --- run outputs ---------------------------------------------------------------

def test_run_emits_all_artifacts(tmp_path):
    out = tmp_path / "run"
    res = harness.run(_cfg(), out, backend="python")
    for name in ("config.json", "stats.csv", "registry.jsonl", "raster.pgm",
                 "events.csv", "summary.json", "message_log.npy",
                 "checkpoint.npz", "run_info.json"):
        assert (out / name).exists(), name
    assert res["steps"] == 12
    on_disk = json.loads((out / "summary.json").read_text())
    assert on_disk == res

    log = np.load(out / "message_log.npy")
    assert log.shape == (12, 64)
    stats = (out / "stats.csv").read_text().splitlines()
    assert len(stats) == 13
    assert stats[0] == "step,max_pop,n_above_40,n_above_8,coverage,distinct"


def test_run_rejects_invalid_config(tmp_path):
    with pytest.raises(ConfigError):
        harness.run(_cfg(steps=0), tmp_path / "x", backend="python")


def test_message_log_replay_equivalence(tmp_path):
    out = tmp_path / "run"
    res = harness.run(_cfg(seed=77), out, backend="python")
    rep = harness.replay(out / "message_log.npy", tmp_path / "replay")
    assert rep["max_pop"] == res["max_pop"]
    assert rep["peak_counts"] == res["peak_counts"]
    assert rep["distinct_total"] == res["distinct_total"]
    assert (tmp_path / "replay" / "stats.csv").read_bytes() == \
        (out / "stats.csv").read_bytes()


def test_registry_dump_matches_replayed_registry(tmp_path):
    out = tmp_path / "run"
    harness.run(_cfg(seed=88), out, backend="python")
    log = np.load(out / "message_log.npy")
    reg = census.MemeRegistry()
    for t in range(log.shape[0]):
        reg.update_from_keys(log[t], t)
    lines = (out / "registry.jsonl").read_text().splitlines()
    assert len(lines) == len(reg)
    first = json.loads(lines[0])
    rec = reg.records[first["key"]]
    assert first["index"] == rec.index == 0
    assert first["peak"] == rec.peak


# --- checkpoint / resume --------------------------------------------------------

def test_checkpoint_roundtrip_bit_identical(tmp_path):
    cfg = _cfg(steps=20)
    out1 = tmp_path / "full"
    res_full = harness.run(cfg, out1, backend="python")

    out2 = tmp_path / "half"
    harness.run(cfg.replace(steps=10), out2, backend="python")
    out3 = tmp_path / "resumed"
    res_res = harness.resume(out2 / "checkpoint.npz", out3, steps=20,
                             backend="python")

    assert res_res == res_full
    assert (out3 / "stats.csv").read_bytes() == (out1 / "stats.csv").read_bytes()
    assert (out3 / "events.csv").read_bytes() == (out1 / "events.csv").read_bytes()
    assert np.array_equal(np.load(out3 / "message_log.npy"),
                          np.load(out1 / "message_log.npy"))
    w1 = load_checkpoint(out1 / "checkpoint.npz")[0]
    w3 = load_checkpoint(out3 / "checkpoint.npz")[0]
    for name in w1.params:
        assert np.array_equal(w1.params[name], w3.params[name])
    assert np.array_equal(w1.h_g, w3.h_g)
    assert np.array_equal(w1.buf_vals, w3.buf_vals)


def test_checkpoint_truncated_file_rejected(tmp_path):
    out = tmp_path / "run"
    harness.run(_cfg(), out, backend="python")
    blob = (out / "checkpoint.npz").read_bytes()
    bad = tmp_path / "truncated.npz"
    bad.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)


def test_checkpoint_not_a_checkpoint(tmp_path):
    path = tmp_path / "other.npz"
    np.savez(path, foo=np.arange(3))
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(path)
    assert "not a memegrid checkpoint" in str(err.value)


def test_checkpoint_hash_mismatch_reports_both(tmp_path):
    out = tmp_path / "run"
    harness.run(_cfg(), out, backend="python")
    import zipfile
    # tamper with the stored config only
    src = out / "checkpoint.npz"
    data = {}
    with np.load(src) as z:
        for k in z.files:
            data[k] = z[k]
    meta = json.loads(bytes(data["meta_json"]).decode())
    meta["config"]["gamma_s"] = 0.7
    data["meta_json"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    bad = tmp_path / "tampered.npz"
    with open(bad, "wb") as fh:
        np.savez(fh, **data)
    with pytest.raises(CheckpointError) as err:
        load_checkpoint(bad)
    assert "hash mismatch" in str(err.value)


def test_resume_cannot_rewind(tmp_path):
    out = tmp_path / "run"
    harness.run(_cfg(steps=10), out, backend="python")
    with pytest.raises(ConfigError):
        harness.resume(out / "checkpoint.npz", tmp_path / "r", steps=5,
                       backend="python")


# --- sweep ----------------------------------------------------------------------

def test_sweep_composition_and_shape(tmp_path):
    rows = harness.sweep([0.0, 1.0], [1.0], [1, 2], tmp_path / "sw",
                         rows=5, cols=5, steps=4, backend="python")
    assert len(rows) == 4
    csv_lines = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert len(csv_lines) == 5

    # a single cell equals a standalone run of the same config
    cell = harness.sweep_config(0.0, 1.0, 1, rows=5, cols=5, steps=4)
    res = harness.run(cell, tmp_path / "single", backend="python",
                      log_messages=False, write_checkpoint=False)
    match = [r for r in rows if (r["gamma_s"], r["gamma_f"], r["seed"]) == (0.0, 1.0, 1)]
    assert match[0]["mean_final_fitness"] == res["mean_final_fitness"]
    assert match[0]["n_memes_ge_8"] == res["peak_counts"]["ge_8"]


def test_sweep_rejects_empty_lists(tmp_path):
    with pytest.raises(ConfigError):
        harness.sweep([], [1.0], [1], tmp_path / "sw")


# --- CLI ---------------------------------------------------------------------------

def test_cli_run_and_replay(tmp_path, capsys):
    out = tmp_path / "cli_run"
    rc = cli_main([
        "run", "--preset", "baseline", "--dims", "8x8", "--steps", "6",
        "--seed", "3", "--out", str(out), "--backend", "python",
    ])
    assert rc == 0
    assert (out / "summary.json").exists()
    captured = json.loads(capsys.readouterr().out)
    assert captured["steps"] == 6

    rc = cli_main(["replay", "--log", str(out / "message_log.npy"),
                   "--out", str(tmp_path / "cli_replay")])
    assert rc == 0


def test_cli_bad_preset_is_usage_error(tmp_path, capsys):
    rc = cli_main(["run", "--preset", "bogus", "--out", str(tmp_path / "x"),
                   "--backend", "python"])
    assert rc == 2
    assert "available" in capsys.readouterr().err


def test_cli_resume(tmp_path, capsys):
    out = tmp_path / "a"
    rc = cli_main(["run", "--dims", "8x8", "--steps", "4", "--seed", "9",
                   "--out", str(out), "--backend", "python"])
    assert rc == 0
    rc = cli_main(["resume", "--checkpoint", str(out / "checkpoint.npz"),
                   "--steps", "8", "--out", str(tmp_path / "b"),
                   "--backend", "python"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out.splitlines()[-1] if False else
                      (tmp_path / "b" / "summary.json").read_text())["steps"] == 8


def test_cli_dims_parse_error():
    with pytest.raises(SystemExit):
        cli_main(["run", "--dims", "32by32"])
