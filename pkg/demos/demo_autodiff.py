"""
Reverse-mode gradients on a dense tape
======================================

Every differentiable op records itself on a ``Tape``; ``backward`` replays the
tape in reverse. Here we check one gradient against finite differences.
"""

import numpy as np

from s2fgl import autodiff as ad

rng = np.random.default_rng(0)
w = ad.Parameter(rng.standard_normal((4, 3)), "W")
x = rng.standard_normal((5, 4))
labels = np.array([0, 2, 1, 1, 0])
mask = np.ones(5, bool)

tape = ad.Tape()
logits = ad.matmul(x, tape.watch(w))
loss = ad.cross_entropy(logits, labels, mask)
tape.backward(loss)
print("loss:", loss.item())

# central difference on one entry
h = 1e-5
w.value[1, 2] += h
up = ad.cross_entropy(x @ w.value, labels, mask).item()
w.value[1, 2] -= 2 * h
down = ad.cross_entropy(x @ w.value, labels, mask).item()
w.value[1, 2] += h
print("autodiff  dL/dW[1,2] =", w.grad[1, 2])
print("numerical dL/dW[1,2] =", (up - down) / (2 * h))

# stop_gradient freezes one side of a product
p = ad.Parameter(np.array([[3.0]]))
tape = ad.Tape()
t = tape.watch(p)
tape.backward(ad.mul(t, ad.stop_gradient(t)))
print("d(p * const(p))/dp at p=3:", p.grad[0, 0])
