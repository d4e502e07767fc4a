import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from glimps.errors import ConfigError
from glimps.metrics import coef_error, misclass_ratio
from glimps.synth import InstanceSpec, derive_seed, generate, read_truth


def test_p_zero_is_exact():
    inst = generate(InstanceSpec(d=50, r=4, p=0.0, seed=1))
    assert not inst.outlier_mask.any()
    np.testing.assert_array_equal(inst.x, inst.u @ inst.theta_true)


def test_p_one_replaces_everything():
    inst = generate(InstanceSpec(d=50, r=4, p=1.0, seed=1))
    assert inst.outlier_mask.all()


@pytest.mark.parametrize("kw", [dict(r=0), dict(r=10, d=10), dict(p=1.5), dict(sigma=-1.0)])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        InstanceSpec(**{"d": 10, "r": 2, **kw})


def test_determinism_bytes():
    for seed in (0, 1, 2**63):
        a = generate(InstanceSpec(d=40, r=3, p=0.5, sigma=0.1, seed=seed))
        b = generate(InstanceSpec(d=40, r=3, p=0.5, sigma=0.1, seed=seed))
        for f in ("u", "x", "theta_true", "outlier_mask"):
            assert getattr(a, f).tobytes() == getattr(b, f).tobytes()
    c = generate(InstanceSpec(d=40, r=3, p=0.5, sigma=0.1, seed=3))
    assert c.u.tobytes() != a.u.tobytes()


def test_derive_seed():
    assert derive_seed(0, 100, 5, 0.5, 0.0, 3) == derive_seed(0, 100, 5, 0.5, 0.0, 3)
    assert derive_seed(0, 100, 5, 0.5, 0.0, 3) != derive_seed(0, 100, 5, 0.5, 0.0, 4)
    assert 0 <= derive_seed("x") < 2**64


def test_distribution_sanity():
    n, masks, u = 0, [], []
    for seed in range(200):
        inst = generate(InstanceSpec(d=50, r=5, p=0.3, seed=seed))
        u.append(inst.u.ravel())
        masks.append(inst.outlier_mask)
    u = np.concatenate(u)
    m = np.concatenate(masks)
    assert abs(u.mean()) < 4 / math.sqrt(u.size)
    assert abs(m.mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / m.size)


def test_noise_level():
    hits = 0
    for seed in range(200):
        inst = generate(InstanceSpec(d=50, r=5, p=0.3, sigma=0.01, seed=seed))
        inl = inst.inlier_mask
        hits += np.max(np.abs(inst.x[inl] - inst.u[inl] @ inst.theta_true)) <= 5 * 0.01
    assert hits / 200 >= 0.99


def test_truth_round_trip(tmp_path):
    inst = generate(InstanceSpec(d=20, r=2, p=0.5, seed=5))
    inst.write_truth(tmp_path / "t.csv")
    theta, mask = read_truth(tmp_path / "t.csv")
    np.testing.assert_array_equal(theta, inst.theta_true)
    np.testing.assert_array_equal(mask, inst.outlier_mask)


def test_coef_error_examples():
    t = np.array([4.0, 1.0])
    assert coef_error(t, t) == 0
    assert coef_error(t, -t) == pytest.approx(1.0)
    assert coef_error(t, [4.0, -5.0]) == pytest.approx(6 / (math.sqrt(17) + math.sqrt(41)))
    assert coef_error(t, [4.0, -5.0]) == pytest.approx(0.5700, abs=1e-4)
    assert coef_error(np.zeros(2), np.zeros(2)) == 0


def test_misclass_examples():
    truth = np.zeros(60, dtype=bool)
    truth[:40] = True
    assert misclass_ratio(truth, truth) == 0
    lab = truth.copy()
    lab[[0, 50]] = ~lab[[0, 50]]
    assert misclass_ratio(truth, lab) == pytest.approx(0.05)
    # denominator is the inlier count, so the ratio can exceed one
    assert misclass_ratio(truth, ~truth) == 1.5
    assert math.isnan(misclass_ratio(np.zeros(4, bool), np.ones(4, bool)))


vec = arrays(np.float64, 4, elements=st.floats(-1e6, 1e6, allow_nan=False))


@settings(max_examples=1000, deadline=None)
@given(vec, vec, st.floats(1e-3, 1e3))
def test_coef_error_properties(a, b, c):
    if not (np.any(a) or np.any(b)):
        return
    e = coef_error(a, b)
    assert 0.0 <= e <= 1.0 + 1e-12
    assert e == pytest.approx(coef_error(b, a), abs=1e-12)
    assert coef_error(c * a, c * b) == pytest.approx(e, abs=1e-9)


def test_popcount_concentration():
    counts = [generate(InstanceSpec(d=100, r=5, p=0.5, seed=s)).outlier_mask.sum() for s in range(10000)]
    # mean count per 100 coordinates, reported per 10000 coordinates
    assert 4900 <= 100 * np.mean(counts) <= 5100
