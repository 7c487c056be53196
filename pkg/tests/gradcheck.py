"""Central finite-difference oracle shared by the gradient tests."""

import numpy as np

H = 1e-5


def numeric_grad(f, x: np.ndarray, h: float = H) -> np.ndarray:
    """d f(x) / dx by central differences; ``f`` maps the array (mutated in place) to a float."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1e-8, np.max(np.abs(a)) + np.max(np.abs(b))))


def check_grads(loss_fn, tensors, h: float = H) -> float:
    """Max relative error between analytic and numeric gradients over ``tensors``."""
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    worst = 0.0
    for t in tensors:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        numeric = numeric_grad(lambda: float(loss_fn().data), t.data, h)
        worst = max(worst, rel_err(analytic, numeric))
    return worst
