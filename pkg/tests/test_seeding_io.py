import numpy as np
import pytest

from rbmlab.harness.config import ExperimentConfig, SCHEMA_VERSION
from rbmlab.io import read_rbm1, write_rbm1, write_csv
from rbmlab.seeding import open_uniforms, seed_derive, stream


def test_seed_derive_is_pure():
    assert seed_derive(7, ["a", 3]) == seed_derive(7, ["a", 3])
    assert seed_derive(7, ["a", 3]) == seed_derive(seed_derive(7, ["a"]), [3])
    assert seed_derive(7, []) == 7


def test_int_and_str_labels_differ():
    assert seed_derive(1, [5]) != seed_derive(1, ["5"])


def test_sibling_seeds_do_not_collide():
    seen = {seed_derive(99, ["sib", i]) for i in range(1_000_000)}
    assert len(seen) == 1_000_000


def test_order_of_derivation_is_irrelevant():
    forward = [seed_derive(3, ["x", i]) for i in range(50)]
    backward = [seed_derive(3, ["x", i]) for i in reversed(range(50))][::-1]
    assert forward == backward


def test_open_uniforms_strictly_inside():
    u = open_uniforms(stream(0, "t"), 200_000)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005


def test_stream_positions_are_addressable():
    a = open_uniforms(stream(5, "t"), 100)
    gen = stream(5, "t")
    head, tail = open_uniforms(gen, 40), open_uniforms(gen, 60)
    assert np.array_equal(a, np.concatenate([head, tail]))


@pytest.mark.parametrize("complex_", [False, True])
def test_rbm1_roundtrip(tmp_path, rng, complex_):
    m = rng.standard_normal((7, 7))
    if complex_:
        m = m + 1j * rng.standard_normal((7, 7))
    path = tmp_path / "m.rbm1"
    write_rbm1(path, m, 2, "hermitian" if complex_ else "symmetric")
    back, w, sym = read_rbm1(path)
    assert np.array_equal(back, m) and w == 2
    assert sym == ("hermitian" if complex_ else "symmetric")
    assert path.read_bytes()[:4] == b"RBM1"


def test_rbm1_rejects_bad_magic(tmp_path):
    p = tmp_path / "x.rbm1"
    p.write_bytes(b"XXXX" + bytes(10))
    with pytest.raises(ValueError):
        read_rbm1(p)


def test_csv_floats_roundtrip(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "a.csv", ["v"], [(x,)])
    assert float((tmp_path / "a.csv").read_text().splitlines()[1]) == x


def test_config_roundtrip_bit_exact(tmp_path):
    cfg = ExperimentConfig("stats", seed=11, options={"stat": "que", "width": 0.05})
    cfg.ensemble.A = 1.5
    cfg.save(tmp_path / "c.json")
    again = ExperimentConfig.load(tmp_path / "c.json")
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_config_rejects_other_schema():
    data = ExperimentConfig("x").to_dict()
    data["schema_version"] = SCHEMA_VERSION + 1
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(data)
    data["schema_version"] = SCHEMA_VERSION
    data["bogus"] = 1
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict(data)
