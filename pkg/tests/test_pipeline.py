import csv

import numpy as np
import pytest

from glimps.errors import ConfigError
from glimps.milp import NOISELESS, warm_start_feasible
from glimps.pipeline import GlimpsConfig, classify_all, glimps_detect, warm_start
from glimps.synth import InstanceSpec, generate

from conftest import INLIERS_EX1, THETA_EX1, U_EX1, X_EX1


def test_example1():
    res = glimps_detect(U_EX1, X_EX1, GlimpsConfig(removal_fraction=0.2))
    np.testing.assert_array_equal(res.inliers, INLIERS_EX1)
    np.testing.assert_allclose(res.theta_hat, THETA_EX1, atol=1e-9)
    assert res.recovered
    assert res.stage1_trace.removed.tolist() == [2]


def test_classify_all_example():
    labels, res = classify_all(U_EX1, X_EX1, THETA_EX1, 1e-6)
    np.testing.assert_allclose(res, [0, 0, 24, 0, 0], atol=1e-12)
    np.testing.assert_array_equal(np.flatnonzero(labels), INLIERS_EX1)
    with pytest.raises(ConfigError):
        classify_all(U_EX1, X_EX1, THETA_EX1, 0.0)


@pytest.mark.parametrize("frac", [0.0, 0.3, 0.6])
def test_all_inlier_reinstates_stage1_removals(frac):
    u = generate(InstanceSpec(d=30, r=3, seed=2)).u
    theta = np.array([1.0, -2.0, 0.5])
    res = glimps_detect(u, u @ theta, GlimpsConfig(removal_fraction=frac))
    assert res.labels.all() and res.recovered
    np.testing.assert_allclose(res.theta_hat, theta, atol=1e-10)
    assert res.stage1_trace.removed.size == int(frac * 30 + 1e-9)


def test_truth_recovered_and_labels_match():
    inst = generate(InstanceSpec(d=60, r=3, p=0.5, seed=4))
    res = glimps_detect(inst.u, inst.x, GlimpsConfig(time_limit=20))
    np.testing.assert_allclose(res.theta_hat, inst.theta_true, atol=1e-8)
    np.testing.assert_array_equal(res.labels, inst.inlier_mask)


def test_scale_equivariance():
    inst = generate(InstanceSpec(d=40, r=3, p=0.4, seed=7))
    a = glimps_detect(inst.u, inst.x)
    for c in (3.0, -0.5):
        b = glimps_detect(inst.u, c * inst.x)
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_allclose(b.theta_hat, c * a.theta_hat, rtol=1e-8, atol=1e-12)


def test_warm_start_is_feasible():
    inst = generate(InstanceSpec(d=30, r=2, p=0.5, seed=3))
    th = np.linalg.lstsq(inst.u, inst.x, rcond=None)[0]
    big_m = 2 * np.max(np.abs(inst.x - inst.u @ th))
    z0, th0 = warm_start(inst.u, inst.x, th, big_m, 1e-6, NOISELESS)
    assert warm_start_feasible(inst.u, inst.x, big_m, z0, th0)
    # fallback path: residuals above M force every flag on
    z0, _ = warm_start(inst.u, inst.x, th, 1e-3, 1e-6, NOISELESS)
    assert z0.all()


def test_p_one_reports_unrecovered_or_small_consensus():
    inst = generate(InstanceSpec(d=20, r=2, p=1.0, seed=3))
    res = glimps_detect(inst.u, inst.x, GlimpsConfig(time_limit=5))
    assert (not res.recovered) or res.inliers.size <= 3


def test_tau_resolution():
    x = np.array([1.0, -3.0])
    assert GlimpsConfig().resolve_tau(x) == pytest.approx(4e-6)
    assert GlimpsConfig(tau=0.5).resolve_tau(x) == 0.5
    assert GlimpsConfig(lam=10.0, sigma=0.01).resolve_tau(x) == pytest.approx(0.03)
    with pytest.raises(ConfigError):
        GlimpsConfig(lam=10.0).resolve_tau(x)
    with pytest.raises(ConfigError):
        GlimpsConfig(tau=-1.0).resolve_tau(x)


def test_noisy_mode():
    inst = generate(InstanceSpec(d=50, r=3, p=0.4, sigma=1e-3, seed=12))
    res = glimps_detect(inst.u, inst.x, GlimpsConfig(removal_fraction=0.3, lam=1000.0, sigma=1e-3,
                                                     time_limit=20))
    assert np.linalg.norm(res.theta_hat - inst.theta_true) < 1e-2
    assert np.mean(res.labels != inst.inlier_mask) < 0.1


def test_input_validation():
    with pytest.raises(ConfigError):
        glimps_detect(U_EX1, X_EX1[:4])
    with pytest.raises(ConfigError):
        glimps_detect(U_EX1[:3], X_EX1[:3])


def test_result_csv(tmp_path):
    res = glimps_detect(U_EX1, X_EX1, GlimpsConfig(removal_fraction=0.2))
    res.to_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["index", "residual", "label"]
    assert [r[2] for r in rows[1:]] == ["inlier", "inlier", "outlier", "inlier", "inlier"]
    assert float(rows[3][1]) == pytest.approx(24.0)
