import logging

import numpy as np
import pytest

from s2fgl import autodiff as ad
from s2fgl.graph import Graph, sbm_generate


def fd_gradients(loss_fn, params, h=1e-5):
    """Central finite differences of ``loss_fn() -> float`` w.r.t. every parameter entry."""
    grads = []
    for p in params:
        g = np.zeros_like(p.value)
        for idx in np.ndindex(p.value.shape):
            old = p.value[idx]
            p.value[idx] = old + h
            up = loss_fn()
            p.value[idx] = old - h
            down = loss_fn()
            p.value[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def autodiff_gradients(build_loss, params):
    """Gradients from one taped evaluation; ``build_loss(tape, leaves) -> Tensor``."""
    for p in params:
        p.zero_grad()
    tape = ad.Tape()
    leaves = [tape.watch(p) for p in params]
    loss = build_loss(tape, leaves)
    tape.backward(loss)
    return [p.grad.copy() for p in params]


def rel_err(got, want):
    got = np.concatenate([g.ravel() for g in got])
    want = np.concatenate([w.ravel() for w in want])
    return np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-8)


def check_gradients(build_loss, params, tol=1e-4):
    def value():
        tape = ad.Tape()
        leaves = [tape.watch(p) for p in params]
        return build_loss(tape, leaves).item()

    got = autodiff_gradients(build_loss, params)
    want = fd_gradients(value, params)
    err = rel_err(got, want)
    assert err < tol, f"relative gradient error {err:.3e}"
    return err


def random_graph(n, p, d, seed, num_classes=3):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    return Graph(n, edges, rng.standard_normal((n, d)), rng.integers(0, num_classes, n), num_classes)


@pytest.fixture
def two_triangles():
    return sbm_generate([3, 3], 1.0, 0.0, 2, seed=0)


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("s2fgl").setLevel(logging.ERROR)
    yield
