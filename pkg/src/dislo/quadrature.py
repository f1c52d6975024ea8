"""Composite Gauss-Legendre rules on panel meshes."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_panels(breaks, order=8):
    """Composite Gauss-Legendre rule on consecutive panels.

    Parameters
    ----------
    breaks : array_like
        Strictly increasing panel end points.
    order : int
        Nodes per panel.

    Returns
    -------
    nodes, weights : ndarray
    """
    b = np.asarray(breaks, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("need at least two break points")
    x, w = _legendre(int(order))
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def uniform_panels(a, b, n_panels, order=8, extra_breaks=()):
    """Uniform panels on [a, b], optionally split at extra interior points."""
    br = np.linspace(a, b, int(n_panels) + 1)
    extra = [t for t in extra_breaks if a < t < b]
    if extra:
        br = np.unique(np.concatenate([br, extra]))
    return gauss_panels(br, order)
