"""Finite-difference gradient checking helpers shared by the loss tests."""

import numpy as np
import torch

from mupotrack.detector.losses import LabelBatch

FD_H = 1e-4


def make_random_batch(rng, b=2, hp=4, wp=4):
    """Randomized labels on a (hp, wp) TEP grid, float64."""
    p = np.zeros((b, hp, wp))
    pos = np.zeros((b, hp, wp), dtype=bool)
    truth = np.empty((b, 2))
    for s in range(b):
        truth[s] = rng.uniform(0.2, hp - 0.2), rng.uniform(0.2, wp - 0.2)
        ti, tj = int(truth[s, 0]), int(truth[s, 1])
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                r, c = ti + di, tj + dj
                if 0 <= r < hp and 0 <= c < wp:
                    p[s, r, c] = 1.0
                    pos[s, r, c] = True
    c_mask = rng.random((b, hp, wp)) < 0.5
    c_mask[:, 0, 0] = True  # keep the inside set nonempty
    return LabelBatch(
        p=torch.tensor(p, dtype=torch.float64),
        pos_mask=torch.tensor(pos),
        o_alpha=torch.tensor(rng.uniform(0.05, 0.95, size=b), dtype=torch.float64),
        truth_tep=torch.tensor(truth, dtype=torch.float64),
        imm_tep=torch.tensor(rng.uniform(0.0, hp, size=(b, 2)), dtype=torch.float64),
        c_mask=torch.tensor(c_mask),
    )


def make_random_pred(rng, b=2, hp=4, wp=4):
    """(p, off, alpha) float64 leaves away from the clamp kinks."""
    p = torch.tensor(rng.uniform(0.05, 0.95, size=(b, hp, wp)), requires_grad=True)
    off = torch.tensor(rng.uniform(-0.9, 1.9, size=(b, 2, hp, wp)), requires_grad=True)
    alpha = torch.tensor(rng.uniform(0.05, 0.95, size=(b, hp, wp)), requires_grad=True)
    return p, off, alpha


def fd_relative_error(loss_fn, leaves, h=FD_H):
    """Max relative gap between autograd and central-difference gradients.

    loss_fn maps the leaf tuple to a scalar tensor; every leaf is float64 with
    requires_grad set.
    """
    for leaf in leaves:
        if leaf.grad is not None:
            leaf.grad = None
    loss = loss_fn(*leaves)
    loss.backward()
    worst = 0.0
    for leaf in leaves:
        g_ad = leaf.grad.detach().numpy().ravel().copy()
        flat = leaf.detach().numpy().ravel()
        g_fd = np.empty_like(g_ad)
        with torch.no_grad():
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = float(loss_fn(*leaves))
                flat[i] = orig - h
                down = float(loss_fn(*leaves))
                flat[i] = orig
                g_fd[i] = (up - down) / (2.0 * h)
        denom = max(np.abs(g_ad).max(), np.abs(g_fd).max(), 1e-8)
        worst = max(worst, np.abs(g_ad - g_fd).max() / denom)
    return worst
