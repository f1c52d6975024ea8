"""One-dimensional scalar energies with the ``|x - y|**-2`` kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..kernels import phi_layer
from ..quadrature import gauss_panels
from .clustering import JumpSet1D


def _overlap_breaks(A, B, extra):
    """Kinks of ``tau -> |A cap (B - tau)|`` plus extra points, for A left of B."""
    (a0, a1), (b0, b1) = A, B
    pts = {b0 - a1, b0 - a0, b1 - a1, b1 - a0}
    lo, hi = b0 - a1, b1 - a0
    pts |= {e for e in extra if lo < e < hi}
    return sorted(p for p in pts if lo <= p <= hi)


def _overlap(A, B, tau):
    (a0, a1), (b0, b1) = A, B
    return np.maximum(np.minimum(a1, b1 - tau) - np.maximum(a0, b0 - tau), 0.0)


def interval_pair_integral(kernel, A, B, kinks=(), order=16):
    """``int_A int_B kernel(y - x) dy dx`` for disjoint intervals, ``A`` left of ``B``.

    Reduced to the difference variable, where the overlap length is piecewise
    linear; Gauss panels are split at its kinks and at ``kinks``.
    """
    br = _overlap_breaks(A, B, kinks)
    if len(br) < 2 or br[-1] - br[0] <= 0:
        return 0.0
    tau, w = gauss_panels(br, order)
    return float(np.dot(w, kernel(tau) * _overlap(A, B, tau)))


def layer_energy_1d(h, jumps, window=None, order=16):
    """``p`` of a characteristic function for the one-dimensional layer ``h``.

    Parameters
    ----------
    h : int
        Layer index; the kernel is ``phi_h`` with exponent 2.
    jumps : JumpSet1D or sequence of float
    window : tuple of float, optional
        Integration interval, defaults to the jump set's interval.
    """
    if not isinstance(jumps, JumpSet1D):
        jumps = JumpSet1D(tuple(jumps), 0, (-1e300, 1e300) if window is None else tuple(window))
    lo, hi = window if window is not None else jumps.interval
    pts = [p for p in jumps.points if lo < p < hi]
    if not pts:
        return 0.0
    edges = [lo] + pts + [hi]
    pieces = list(zip(edges[:-1], edges[1:]))
    vals = [int(jumps.value(0.5 * (a + b))) for a, b in pieces]
    R = 2.0**-h
    kinks = (0.5 * R, R)

    def kern(t):
        return np.asarray(phi_layer(h, t, dim=1))

    total = []
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            if vals[i] == vals[j] or pieces[j][0] - pieces[i][1] >= R:
                continue
            A = (max(pieces[i][0], pieces[j][0] - R), pieces[i][1])
            B = (pieces[j][0], min(pieces[j][1], pieces[i][1] + R))
            total.append(2.0 * interval_pair_integral(kern, A, B, kinks, order))
    return math.fsum(total)


@dataclass
class IsolatedJump:
    value: float
    flags: list = field(default_factory=list)


def isolated_jump_energy(h, jumps=(0.0,), window=None):
    """Layer-``h`` energy of jumps on the window ``I_h = (x - 2**-h, x + 2**-h)``.

    With a single jump and full clearance the value is ``2 ln 2`` for every
    ``h``. Clearance violations are reported in ``flags``.
    """
    jumps = tuple(float(x) for x in jumps)
    R = 2.0**-h
    if window is None:
        window = (jumps[0] - R, jumps[0] + R) if jumps else (-R, R)
    lo, hi = window
    flags = []
    for i, x in enumerate(jumps):
        if x - lo < R or hi - x < R:
            flags.append(f"jump {i} at {x:g} is closer than 2^-{h} to the window edge")
        if i and x - jumps[i - 1] < R:
            flags.append(f"jumps {i - 1} and {i} are closer than 2^-{h}")
    val = layer_energy_1d(h, JumpSet1D(jumps, 0, (lo, hi)), (lo, hi)) if jumps else 0.0
    return IsolatedJump(val, flags)


# two-well functional


def _jump_mesh(centres, eps, support, L, n_inner=8, ratio=1.5):
    a = support * eps
    br = {-L, L}
    for c in centres:
        br.update(c + np.linspace(-a, a, 2 * n_inner + 1))
        br.update([c - 0.5 * eps, c + 0.5 * eps])
        d = a
        while d * ratio < 2 * L:
            d *= ratio
            br.update([c - d, c + d])
    br = np.array(sorted(b for b in br if -L <= b <= L))
    # merge float near-duplicates, they would create degenerate panels
    keep = np.concatenate([[True], np.diff(br) > 1e-12 * L])
    keep[-1] = True
    br = br[keep]
    if br.size > 2 and br[-1] - br[-2] <= 1e-12 * L:
        br = np.delete(br, -2)
    return br


def _square_nodes(br, order):
    x, w = np.polynomial.legendre.leggauss(order)
    x01, w01 = 0.5 * (x + 1.0), 0.5 * w
    n = br.size - 1
    lo, hi = br[:-1], br[1:]
    t = (lo[:, None] + (hi - lo)[:, None] * x01).ravel()
    wt = ((hi - lo)[:, None] * w01).ravel()
    idx = np.repeat(np.arange(n), order)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    W = np.outer(wt, wt)
    off = idx[:, None] != idx[None, :]
    pts = [(T1[off], T2[off], W[off])]
    # diagonal panels: two collapsed triangles keep nodes off x = y
    U, V = np.meshgrid(x01, x01, indexing="ij")
    WU = np.outer(w01, w01) * U
    for i in range(n):
        a, b = lo[i], hi[i]
        d = b - a
        p1 = a + U * d
        p2 = a + U * V * d
        pts.append(((p1).ravel(), (p2).ravel(), (WU * d * d).ravel()))
        pts.append(((p2).ravel(), (p1).ravel(), (WU * d * d).ravel()))
    return tuple(np.concatenate(c) for c in zip(*pts))


def two_well_energy(eps, jumps, ramp, support, L=1.0, order=8):
    """Rescaled two-well functional on ``(-L, L)`` for smoothed jumps.

    ``u(x) = sum_j (-1)**j ramp((x - x_j) / eps)`` so ``u`` alternates between
    0 and 1. Returns ``(nonlocal, penalty, total)``.
    """
    eps = float(eps)
    if not 0.0 < eps < math.exp(-1.0):
        raise DomainError(f"eps={eps!r} must lie in (0, 1/e)")
    jumps = sorted(float(x) for x in jumps)
    rescale = 1.0 / math.log(1.0 / eps)
    if not jumps:
        return 0.0, 0.0, 0.0
    sign = np.array([(-1.0) ** j for j in range(len(jumps))])

    def u(x):
        return np.sum(sign * ramp((x[..., None] - np.asarray(jumps)) / eps), axis=-1)

    br = _jump_mesh(jumps, eps, support, L)
    t1, t2, w = _square_nodes(br, order)
    du = u(t1) - u(t2)
    nl = float(np.sum(w * (du / (t1 - t2)) ** 2))
    tp, wp = gauss_panels(br, order)
    up = u(tp)
    d2 = np.minimum(np.abs(up), np.abs(1.0 - up)) ** 2
    pen = float(np.dot(wp, d2)) / eps
    return nl, pen, (nl + pen) * rescale
