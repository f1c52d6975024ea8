"""Snapping of one-dimensional profiles ``a lambda(t) + b`` to integer data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from ..energy import dist_to_lattice, nearest_lattice
from ..errors import DomainError


@dataclass(frozen=True, eq=False)
class SnapResult:
    """Integer profile ``u* = a* lambda* + b*`` and its distances.

    Attributes
    ----------
    a, b : ndarray of int
    lam : ndarray of int
        Per-sample integer profile.
    values : ndarray
        ``u*`` at the samples.
    l1_error : float
        ``||u - u*||_{L1}``.
    dist_l1 : float
        ``||dist(u, Z^N)||_{L1}``.
    branch : str
        ``"collinear"`` or ``"degenerate"``.
    """

    a: np.ndarray
    b: np.ndarray
    lam: np.ndarray
    values: np.ndarray
    l1_error: float
    dist_l1: float
    branch: str

    @property
    def ratio(self):
        if self.dist_l1 == 0.0:
            return 0.0 if self.l1_error == 0.0 else math.inf
        return self.l1_error / self.dist_l1

    def to_dict(self):
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "l1_error": self.l1_error,
            "dist_l1": self.dist_l1,
            "branch": self.branch,
        }


def primitive(v):
    """Shortest nonzero integer vector parallel to the integer vector ``v``."""
    v = [int(x) for x in v]
    g = reduce(math.gcd, (abs(x) for x in v), 0)
    if g == 0:
        raise DomainError("zero vector has no primitive direction")
    return np.array([x // g for x in v], dtype=np.int64)


def _l1(u, us, wt):
    return float(np.dot(wt, np.linalg.norm(u - us, axis=-1)))


def snap_one_dimensional(t, u, dt=None, M=None):
    """Integer one-dimensional profile close to the samples ``u(t_j)``.

    Parameters
    ----------
    t : array_like, shape (n,)
        Sample positions (only their weights matter).
    u : array_like, shape (n, N)
    dt : float or array_like, optional
        Sample weights; defaults to the spacing of a uniform ``t``.
    M : float, optional
        Sup bound on the non-constant part; checked when given.

    Returns
    -------
    SnapResult
    """
    t = np.asarray(t, dtype=float).ravel()
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[0] != t.size:
        raise DomainError(f"samples u{u.shape} do not match positions t{t.shape}")
    if dt is None:
        if t.size > 1 and not np.allclose(np.diff(t), t[1] - t[0]):
            raise DomainError("non-uniform positions need explicit weights dt")
        dt = t[1] - t[0] if t.size > 1 else 1.0
    wt = np.broadcast_to(np.asarray(dt, dtype=float), t.shape).copy()
    if wt.shape != t.shape:
        raise DomainError("weights must match the positions")
    if M is not None and np.max(np.linalg.norm(u - u.mean(axis=0), axis=-1), initial=0.0) > 2.0 * M + 1e-12:
        raise DomainError(f"profile oscillation exceeds the bound M={M}")
    N = u.shape[1]
    z = nearest_lattice(u).astype(np.int64)
    dist = float(np.dot(wt, dist_to_lattice(u)))
    keys, inv = np.unique(z, axis=0, return_inverse=True)
    inv = inv.ravel()
    vol = np.bincount(inv, weights=wt, minlength=len(keys))
    # volume descending, then lexicographic
    order = sorted(range(len(keys)), key=lambda i: (-vol[i], tuple(keys[i])))
    w1 = keys[order[0]]
    zero = np.zeros(N, dtype=np.int64)
    deg_vals = np.broadcast_to(w1.astype(float), u.shape).copy()
    degenerate = SnapResult(zero, w1.copy(), np.zeros(t.size, dtype=np.int64), deg_vals, _l1(u, deg_vals, wt), dist, "degenerate")
    if len(keys) < 2:
        return degenerate
    w2 = keys[order[1]]
    a = primitive(w2 - w1)
    aa = int(a @ a)
    lam = np.zeros(t.size, dtype=np.int64)
    for i, w in enumerate(keys):
        d = w - w1
        c = int(d @ a)
        if c % aa == 0 and np.array_equal((c // aa) * a, d):
            lam[inv == i] = c // aa
    vals = w1[None, :] + lam[:, None] * a[None, :]
    full = SnapResult(a, w1.copy(), lam, vals.astype(float), _l1(u, vals, wt), dist, "collinear")
    return degenerate if degenerate.l1_error < full.l1_error else full


def counterexample_profile(k, samples_per_unit=64):
    """Profile with ``a = (1, 1/k)`` and ``lambda`` in ``{0, 1, k}`` on ``(0, 3)``.

    Returns ``(t, u, dt)`` sampled at cell midpoints.
    """
    n = 3 * int(samples_per_unit)
    dt = 3.0 / n
    t = dt * (np.arange(n) + 0.5)
    lam = np.where(t <= 1.0, 0.0, np.where(t <= 2.0, 1.0, float(k)))
    u = lam[:, None] * np.array([1.0, 1.0 / k])[None, :]
    return t, u, dt
