import math
import os
from pathlib import Path

import numpy as np
import pytest

import funlag

DATA = Path(os.environ.get("FUNLAG_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_load_model_dims():
    net = funlag.load_model(str(DATA / "toy_relu_model.json"))
    assert net.input_dim == 2
    assert net.output_dim == 3
    assert not net.is_deterministic


def test_missing_model_raises():
    with pytest.raises(funlag.ParseError):
        funlag.load_model(str(DATA / "does_not_exist.json"))
    with pytest.raises(ValueError):
        funlag.load_model(str(DATA / "does_not_exist.json"))


def test_bounds_contain_samples():
    net = funlag.load_model(str(DATA / "toy_relu_model.json"))
    lo, hi = np.array([0.4, 0.4]), np.array([0.6, 0.6])
    boxes = funlag.propagate_bounds(net, lo, hi)
    assert len(boxes) == net.num_layers + 1
    rng = np.random.default_rng(0)
    for seed in range(200):
        x = rng.uniform(lo, hi)
        y = net.forward_sample(x, seed)
        assert np.all(y >= boxes[-1][0]) and np.all(y <= boxes[-1][1])


def test_verify_exit_states():
    cert = funlag.verify(DATA / "toy_affine_model.json", DATA / "toy_spec_robust.json", steps=50)
    assert cert["verified"] is True
    assert funlag.real(cert["bound"]) <= funlag.real(cert["threshold"])
    cert = funlag.verify(DATA / "toy_relu_model.json", DATA / "toy_spec_false.json", steps=50)
    assert cert["verified"] is False
    with pytest.raises(funlag.ConfigError):
        funlag.verify(DATA / "toy_affine_model.json", DATA / "toy_spec_dist.json", family="linear")


def test_verify_is_deterministic():
    a = funlag.verify(DATA / "toy_relu_model.json", DATA / "toy_spec_false.json", steps=30, seed=3)
    b = funlag.verify(DATA / "toy_relu_model.json", DATA / "toy_spec_false.json", steps=30, seed=3, threads=2)
    assert a == b


def test_auc_brute_force():
    rng = np.random.default_rng(1)
    ids = list(rng.integers(0, 5, 30) / 4.0)
    ood = list(rng.integers(0, 5, 20) / 4.0)
    brute = sum((a > b) + 0.5 * (a == b) for a in ids for b in ood) / (len(ids) * len(ood))
    assert funlag.guaranteed_auc(ood, ids) == brute
    assert funlag.adversarial_auc([0.0], [1.0]) == 1.0


def test_softmax_exact_unit_box():
    value, x = funlag.final_softmax_exact(0, np.zeros(2), np.zeros(2), np.ones(2))
    assert value == pytest.approx(math.e / (math.e + 1.0), rel=1e-15)
    assert list(x) == [1.0, 0.0]
    lo, hi = funlag.softmax_range(0, np.zeros(2), np.ones(2))
    assert hi == pytest.approx(value)
    assert lo == pytest.approx(1.0 / (1.0 + math.e))
