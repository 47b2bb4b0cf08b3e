import math

import numpy as np
import pytest

import wlhn

CYCLE_WITH_TAILS = (10, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 5), (5, 6), (6, 7), (2, 8), (8, 9)])


def ball_distance(x, y):
    z = 1 + 2 * np.sum((x - y) ** 2) / ((1 - x @ x) * (1 - y @ y))
    return math.log(z + math.sqrt(z * z - 1))


def test_geometry():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=3)
        x *= rng.uniform(0.0, 0.5) / np.linalg.norm(x)
        y = rng.normal(size=3)
        y *= rng.uniform(0.0, 0.9) / np.linalg.norm(y)
        assert wlhn.distance(x, y) == pytest.approx(ball_distance(x, y), rel=1e-10)
        assert wlhn.distance_from_origin(y) == pytest.approx(2 * math.atanh(np.linalg.norm(y)), rel=1e-12)
        np.testing.assert_allclose(wlhn.exp_map(x, wlhn.log_map(x, y)), y, atol=1e-10)
        np.testing.assert_allclose(wlhn.mobius_add(-x, x), np.zeros(3), atol=1e-12)
        assert np.linalg.norm(wlhn.reflect_to_origin(x, x)) < 1e-12


def test_wl_colors_on_a_path():
    assert wlhn.wl_colors(3, [(0, 1), (1, 2)], 1, "monochromatic") == [[0, 0, 0], [0, 1, 0]]


def test_embedding_tracks_the_hierarchy():
    out = wlhn.embed([CYCLE_WITH_TAILS], layers=4, dim=32, tau=1.0, seed=0)
    assert len(out["hierarchy"]["nodes"]) == 30
    points = out["hyperbolic"]
    assert points.shape == (30, 32)
    assert np.all(np.linalg.norm(points, axis=1) < 1.0)
    assert wlhn.wl_correlation(out["hierarchy"], points, "hyperbolic") > 0.9
    gin = wlhn.embed([CYCLE_WITH_TAILS], layers=4, dim=32, arm="gin")
    assert "hyperbolic" not in gin


def test_sarkar_path():
    out = wlhn.sarkar_embed([-1, 0, 1, 2], tau=1.5)
    p = out["points"]
    for i in range(3):
        assert ball_distance(p[i], p[i + 1]) == pytest.approx(1.5, abs=1e-9)
    assert out["distortion"]["max_distortion"] < 1e-9
    with pytest.raises(ValueError):
        wlhn.sarkar_embed([-1, 0], tau=0.0)


def test_generate_and_train():
    a = wlhn.generate("er", n=60, p=0.1, graphs=2, target="effective-size", seed=3)
    assert a == wlhn.generate("er", n=60, p=0.1, graphs=2, target="effective-size", seed=3)
    assert len(a["graphs"]) == 2
    summary = wlhn.train({
        "task": "node-regression",
        "dataset": {"kind": "generate", "gen": {"kind": "ba", "n": 60, "m": 2, "graphs": 2}},
        "model": {"dim": 8, "layers": 2},
        "optim": {"lr": 0.01, "epochs": 3},
    })
    assert summary["metric"] == "mse"
    assert [e["epoch"] for e in summary["history"]] == [1, 2, 3]
    assert all(math.isfinite(e["train_loss"]) for e in summary["history"])


def test_cli_in_process():
    code, out, _ = wlhn.run_cli(["--help"])
    assert code == 0 and "train" in out
    code, _, err = wlhn.run_cli(["gen", "--kind", "nope"])
    assert code == 1 and err
