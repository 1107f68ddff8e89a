"""Training objectives, each returning (scalar loss, dL/dp).

Probabilities are clamped to [EPS, 1-EPS] inside the cross entropy;
where the clamp is active the derivative of the clip is zero, so the
gradient is zeroed rather than evaluated at the boundary.  The
discrepancy loss |p1 - p2| uses the sign subgradient with 0 at ties.
"""
from __future__ import annotations

import numpy as np

EPS = 1e-7


def bce_loss(p: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {y.shape}")
    n = max(len(p), 1)
    pc = np.clip(p, EPS, 1.0 - EPS)
    loss = float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).mean()) if len(p) else 0.0
    inside = (p > EPS) & (p < 1.0 - EPS)
    dp = np.where(inside, (pc - y) / (pc * (1.0 - pc)), 0.0) / n
    return loss, dp


def discrepancy_loss(p1: np.ndarray, p2: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    if p1.shape != p2.shape:
        raise ValueError(f"shape mismatch {p1.shape} vs {p2.shape}")
    n = max(len(p1), 1)
    diff = p1 - p2
    loss = float(np.abs(diff).mean()) if len(p1) else 0.0
    sign = np.sign(diff)
    return loss, sign / n, -sign / n
