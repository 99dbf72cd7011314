import json
import math

import numpy as np
import pytest

import tgc


def test_two_node_graph_closed_form():
    sigma = 2.0
    g = tgc.build_graph(np.array([[0.0, 0.0], [sigma * math.sqrt(2.0), 0.0]]), sigma=sigma)
    assert len(g) == 2
    assert g.adjacency[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)
    np.testing.assert_allclose(g.laplacian, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)
    values, vectors = tgc.eig_sym(g.laplacian)
    np.testing.assert_allclose(values, [0.0, 2.0], atol=1e-12)
    assert vectors.shape == (2, 2)


def test_eig_sym_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    a = a + a.T
    values, vectors = tgc.eig_sym(a)
    np.testing.assert_allclose(values, np.linalg.eigvalsh(a), atol=1e-10)
    np.testing.assert_allclose(a @ vectors, vectors * values, atol=1e-9)


def test_soft_count_example():
    assert tgc.soft_component_count([0.0, 2.0]) == pytest.approx(0.9999546, abs=1e-7)
    assert tgc.soft_component_count([]) == 0.0


def test_loss_and_gradient_roundtrip():
    c = np.array([[0.0, 0.0], [5.0, 1.0], [9.0, 7.0], [2.0, 8.0]])
    g = tgc.build_graph(c, sigma=6.0)
    same = tgc.tgc_loss(g, g)
    assert same.total == 0.0
    grad, loss, degenerate = tgc.tgc_grad_centroids(g, g)
    assert grad.shape == (4, 2)
    assert np.abs(grad).max() <= 1e-9
    assert loss.total == 0.0
    other = tgc.build_graph(c[:3] * 1.3, sigma=6.0)
    l = tgc.tgc_loss(g, other)
    assert l.total == pytest.approx(l.spec + l.conn + l.adj, abs=1e-12)


def test_regions_and_metrics():
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[0, 0] = 1
    mask[1, 1] = 1
    assert len(tgc.connected_components(mask, connectivity=4)) == 2
    assert len(tgc.connected_components(mask, connectivity=8)) == 1
    assert tgc.dice_jaccard(mask, mask) == (1.0, 1.0)
    empty = np.zeros((8, 8), dtype=np.uint8)
    assert tgc.dice_jaccard(empty, empty) == (1.0, 1.0)
    p = np.zeros((5, 5))
    p[1:4, 1:4] = 0.9
    np.testing.assert_allclose(tgc.centroids(p, min_area=1), [[2.0, 2.0]])


def test_validation_errors_surface():
    with pytest.raises(tgc._core.ValidationError):
        tgc.build_graph(np.array([[0.0, 0.0], [1.0, 1.0]]), k=0)
    with pytest.raises(tgc._core.ValidationError):
        tgc.rampup_weight(-1)
    with pytest.raises(tgc._core.IoError):
        tgc.load_map("/nonexistent/map.pgm")


def test_scene_features_and_forward():
    image, mask, placed = tgc.generate_scene(seed=3, index=1)
    image2, mask2, _ = tgc.generate_scene(seed=3, index=1)
    assert image.shape == (64, 64) and mask.shape == (64, 64)
    assert np.array_equal(image, image2) and np.array_equal(mask, mask2)
    assert placed >= 1
    f = tgc.featurize(image)
    assert f.shape == (64, 64, 7)
    np.testing.assert_allclose(f[..., 6], 1.0)
    np.testing.assert_allclose(tgc.forward([0.0] * 7, image), 0.5)
    assert tgc.dice_ce_loss(np.full((4, 4), 0.5), np.zeros((4, 4), dtype=np.uint8)) == pytest.approx(
        (1.0 - 1.0 / 9.0) + math.log(2.0), abs=1e-12
    )


def test_gradcheck_report():
    report = json.loads(tgc.run_gradcheck(n_instances=5))
    assert report["passed"]
    assert report["max_rel_err"] < 1e-4
