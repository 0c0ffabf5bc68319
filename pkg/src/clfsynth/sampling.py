"""Deterministic low-discrepancy sampling of boxes and sublevel sets.

All sampled certificates in this package draw scrambled Halton points with
a fixed seed, so identical inputs reproduce identical reports.
"""

import numpy as np
from scipy.stats import qmc


class Box:
    """Axis-aligned box given by per-coordinate lower and upper bounds."""

    def __init__(self, lows, highs):
        self.lows = np.atleast_1d(np.asarray(lows, dtype=float))
        self.highs = np.atleast_1d(np.asarray(highs, dtype=float))
        if self.lows.shape != self.highs.shape or self.lows.ndim != 1:
            raise ValueError("lows and highs must be 1-d arrays of equal length")
        if np.any(self.lows >= self.highs):
            raise ValueError("each low bound must be strictly below its high bound")
        self.dim = self.lows.size

    @classmethod
    def centered(cls, half_widths):
        h = np.atleast_1d(np.asarray(half_widths, dtype=float))
        return cls(-h, h)

    def contains(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lows) and np.all(x <= self.highs))

    def to_dict(self):
        return {"lows": self.lows.tolist(), "highs": self.highs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["lows"], d["highs"])


def halton_engine(dim, seed=0):
    return qmc.Halton(d=dim, scramble=True, seed=seed)


def sample_box(box, n, seed=0, engine=None):
    """n Halton points inside the box, shape (n, dim)."""
    if engine is None:
        engine = halton_engine(box.dim, seed)
    u = engine.random(n)
    return box.lows + u * (box.highs - box.lows)


def sample_where(box, predicate, n, seed=0, max_batches=60, engine=None):
    """Rejection-sample up to n box points satisfying a scalar predicate.

    Returns whatever was found once max_batches Halton batches are
    exhausted, which can be fewer than n points (possibly none).
    """
    if engine is None:
        engine = halton_engine(box.dim, seed)
    kept = []
    count = 0
    batch = max(n, 256)
    for _ in range(max_batches):
        pts = sample_box(box, batch, engine=engine)
        for x in pts:
            if predicate(x):
                kept.append(x)
                count += 1
                if count >= n:
                    return np.array(kept)
    return np.array(kept) if kept else np.empty((0, box.dim))


def quadratic_level_box(P, level, slack=1.1):
    """Bounding box of the ellipsoid {x' P x <= level}.

    Half-width along coordinate i is sqrt(level * (P^-1)_ii); the slack
    factor widens it to keep rejection sampling honest for functions that
    are only approximately quadratic.
    """
    P = np.asarray(P, dtype=float)
    Pinv = np.linalg.inv(P)
    hw = slack * np.sqrt(np.maximum(level * np.diag(Pinv), 0.0))
    return Box.centered(hw)
