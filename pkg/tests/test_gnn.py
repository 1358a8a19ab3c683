import numpy as np
import pytest

from s2fgl import autodiff as ad
from s2fgl.gnn import ModelParams, forward, init_params
from s2fgl.graph import Graph

from conftest import check_gradients, random_graph


def model(backbone, g, hidden=5, seed=0):
    return init_params(backbone, g.num_features, hidden, g.num_classes, np.random.default_rng(seed))


@pytest.mark.parametrize("backbone", ["gcn", "acm"])
def test_output_shapes(backbone):
    g = random_graph(9, 0.3, 4, seed=0)
    out = forward(model(backbone, g), g)
    assert out.hidden.shape == (9, 5)
    assert out.logits.shape == (9, 3)


def test_acm_parameter_layout():
    g = random_graph(5, 0.5, 3, seed=1)
    m = model("acm", g)
    assert len(m) == 14
    assert m.shapes()[:7] == [(3, 5)] * 3 + [(5, 1)] * 3 + [(1, 3)]


def test_gcn_on_edgeless_graph_is_plain_mlp():
    g = Graph(3, [], np.eye(3), [0, 1, 2], 3)
    m = model("gcn", g)
    out = forward(m, g)
    w1, w2 = (p.value for p in m)
    np.testing.assert_allclose(out.logits.value, np.maximum(w1, 0) @ w2)


def test_feature_dimension_mismatch():
    g = random_graph(4, 0.5, 3, seed=2)
    m = init_params("gcn", 5, 4, 3, np.random.default_rng(0))
    with pytest.raises(ad.ShapeError):
        forward(m, g)


def test_unknown_backbone():
    with pytest.raises(ValueError):
        init_params("gat", 2, 2, 2, np.random.default_rng(0))


@pytest.mark.parametrize("backbone", ["gcn", "acm"])
def test_backbone_gradient(backbone):
    g = random_graph(10, 0.3, 4, seed=3)
    m = model(backbone, g, hidden=4, seed=5)
    mask = np.ones(10, bool)

    def loss(tape, leaves):
        return ad.cross_entropy(forward(m, g, tape).logits, g.labels, mask)

    check_gradients(loss, m.params)


def test_copy_is_independent():
    g = random_graph(4, 0.5, 2, seed=4)
    m = model("gcn", g)
    c = m.copy()
    c.params[0].value[0, 0] += 1.0
    assert m.params[0].value[0, 0] != c.params[0].value[0, 0]
    assert isinstance(c, ModelParams)
