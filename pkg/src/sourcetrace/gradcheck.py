"""Central-difference gradient checking for any scalar-loss graph."""

import numpy as np

from .autodiff import backward


def grad_check(loss_fn, tensors, eps=1e-5, rng=None, max_coords=None):
    """Compare analytic gradients of ``loss_fn`` against central differences.

    loss_fn rebuilds the graph from the given leaf tensors and returns the
    scalar loss node; it must be deterministic. ``tensors`` maps names to the
    leaves to perturb. When ``max_coords`` is set, at most that many randomly
    chosen coordinates per tensor are probed (the full set otherwise).

    Returns the max over probed coordinates of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    for t in tensors.values():
        t.grad = None
    loss = loss_fn()
    backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in tensors.items()
    }

    worst = 0.0
    for name, t in tensors.items():
        flat = t.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        aflat = analytic[name].reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(loss_fn().data)
            flat[i] = orig - eps
            f_minus = float(loss_fn().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = aflat[i]
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
    return worst
