import json

import numpy as np
import pytest

from rbmlab.harness import ExperimentConfig, run
from rbmlab.harness.cli import main
from rbmlab.harness.pool import pool_map, pool_size
from rbmlab.io import read_rbm1


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name not in ("manifest.json", "config.json")}


def test_sample_command_is_deterministic(tmp_path):
    args = ["sample", "--n", "40", "--w", "5", "--samples", "2", "--seed", "9"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b and "sample_000.rbm1" in a
    m, w, _ = read_rbm1(tmp_path / "a" / "sample_000.rbm1")
    assert m.shape == (40, 40) and w == 5


def test_manifest_lists_every_file(tmp_path):
    out = tmp_path / "s"
    main(["spectrum", "--n", "30", "--w", "4", "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    on_disk = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    listed = sorted(f for f in manifest["files"] if (out / f).exists())
    assert listed == on_disk
    assert manifest["command"] == "spectrum" and manifest["config"]["ensemble"]["n"] == 30


def test_parallel_equals_serial(tmp_path, monkeypatch):
    args = ["stats", "gaps", "--n", "120", "--w", "15", "--samples", "4", "--seed", "3"]
    monkeypatch.setenv("RBMLAB_THREADS", "1")
    main(args + ["--out", str(tmp_path / "serial")])
    monkeypatch.setenv("RBMLAB_THREADS", "2")
    assert pool_size() == 2
    main(args + ["--out", str(tmp_path / "parallel")])
    assert _files(tmp_path / "serial") == _files(tmp_path / "parallel")


def test_pool_map_keeps_order(monkeypatch):
    monkeypatch.setenv("RBMLAB_THREADS", "3")
    assert pool_map(lambda x: x * x, range(20)) == [x * x for x in range(20)]


def test_run_from_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    out = tmp_path / "r"
    main(["sample", "--n", "20", "--w", "3", "--out", str(out)])
    loaded = ExperimentConfig.load(out / "config.json")
    loaded.out = str(tmp_path / "again")
    loaded.save(cfg)
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "again" / "sample_000.rbm1").read_bytes() == (out / "sample_000.rbm1").read_bytes()


def test_errors_name_the_command(tmp_path, capsys):
    assert main(["sample", "--n", "10", "--w", "6", "--out", str(tmp_path)]) == 2
    assert "sample" in capsys.readouterr().err


def test_run_rejects_unknown_command(tmp_path):
    with pytest.raises((RuntimeError, ValueError)):
        run(ExperimentConfig("nonsense", out=str(tmp_path)))
