import math

import numpy as np
import pytest

import jdda


def test_coral_identity_versus_zero():
    out = jdda.coral_loss(np.eye(2), np.zeros((2, 2)))
    assert out["value"] == pytest.approx(0.0625, abs=1e-12)
    assert out["grad_source"].shape == (2, 2)


def test_instance_two_samples():
    out = jdda.instance_loss(np.array([[0.0, 0.0], [3.0, 4.0]]), [1, 1], alpha=2.0)
    assert out["value"] == pytest.approx(100.0, abs=1e-12)
    assert out["terms"] == 4


def test_center_update_and_loss():
    c = jdda.update_centers(np.zeros((1, 2)), np.array([[3.0, 5.0], [4.0, 4.0], [5.0, 3.0]]), [0, 0, 0], 0.5)
    np.testing.assert_allclose(c, [[1.5, 1.5]], atol=1e-12)
    loss = jdda.center_loss(np.array([[1.0, 0.0]]), [0], np.zeros((2, 2)))
    assert loss["value"] == pytest.approx(1.0)


def test_pairwise_and_covariance():
    d = jdda.pairwise_euclidean(np.array([[0.0, 0.0], [3.0, 4.0]]))
    np.testing.assert_allclose(d, [[0, 5], [5, 0]])
    x = np.random.default_rng(0).normal(size=(6, 3))
    xc = x - x.mean(axis=0)
    np.testing.assert_allclose(jdda.centered_covariance(x), xc.T @ xc, atol=1e-12)


def test_schedule():
    assert jdda.lambda_schedule(0.0) == 0.0
    assert jdda.lambda_schedule(1.0, 10.0) == pytest.approx(2 / (1 + math.exp(-10)) - 1)


def test_gradient_suite_small():
    reports = jdda.gradient_suite(instances=5)
    assert reports and all(r["passed"] for r in reports)


def test_run_experiment_in_memory():
    config = {
        "methods": "source_only,jdda_center",
        "seeds": "1,2",
        "iterations": "20",
        "batch_per_domain": "16",
        "source_per_class": "20",
        "target_per_class": "20",
        "hidden": "8",
        "bottleneck_dim": "4",
    }
    result = jdda.run_experiment(config)
    assert len(result["runs"]) == 4
    assert [c["method"] for c in result["cells"]] == ["source_only", "jdda_center"]
    assert result["cells"][0]["lambda2"] is None
    assert result == jdda.run_experiment(config)


def test_config_error():
    with pytest.raises(ValueError, match="eta"):
        jdda.run_experiment({"eta": "fast"})
