"""Radial mollifier with a flat top.

``phi(r) = A`` on ``r <= 1/2`` and ``A * (1 - S((r - 1/2) / w))`` on
``1/2 < r <= 1/2 + w`` with the cubic smoothstep ``S(t) = 3t^2 - 2t^3``.
The amplitude ``A`` normalises the integral to one. It is at least one,
so ``phi >= 1`` on the half ball, only while the shoulder carries at most
``1 - pi/4`` of the mass, i.e. for ``w`` up to about 0.126.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ..errors import ConfigurationError
from ..quadrature import gauss_panels


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class MollifierSpec:
    """Flat-top radial mollifier on the unit ball.

    Parameters
    ----------
    blend : float
        Width of the smoothstep shoulder outside the plateau ``B_{1/2}``.
    """

    blend: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.blend <= 0.5:
            raise ConfigurationError("blend width must lie in (0, 1/2]")
        if self.amplitude < 1.0:
            raise ConfigurationError(f"blend width {self.blend} gives amplitude {self.amplitude:.4f} < 1 on the half ball")

    @property
    def plateau(self):
        return 0.5

    @property
    def radius(self):
        """Outer edge of the support, ``1/2 + blend``."""
        return 0.5 + self.blend

    @property
    def amplitude(self):
        w = self.blend
        shoulder = 2.0 * math.pi * w * (0.25 + 0.15 * w)
        return 1.0 / (0.25 * math.pi + shoulder)

    def __call__(self, r):
        """Radial values at ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        out = self.amplitude * (1.0 - smoothstep((r - 0.5) / self.blend))
        return np.where(r <= self.radius, out, 0.0)

    def scaled(self, x, y, scale):
        """``scale**-2 phi(|(x, y)| / scale)``; ``scale = 2**-h`` gives ``phi_h``."""
        return self(np.hypot(x, y) / scale) / scale**2

    def integral(self, order=16):
        """``int phi`` over the plane by radial Gauss quadrature (should be 1)."""
        r, w = gauss_panels([0.0, 0.5, self.radius], order)
        return float(2.0 * math.pi * np.dot(w, r * self(r)))

    def stencil(self, scale, spacing):
        """Cell-centre samples of the scaled kernel, renormalised to unit discrete mass.

        Returns an odd square array ``K`` with ``sum(K) * spacing**2 == 1``.
        """
        if scale < spacing:
            raise ConfigurationError(f"mollifier scale {scale:g} is below the grid spacing {spacing:g}")
        n = int(math.ceil(self.radius * scale / spacing))
        i = np.arange(-n, n + 1) * spacing
        X, Y = np.meshgrid(i, i, indexing="ij")
        K = self.scaled(X, Y, scale)
        K /= K.sum() * spacing**2
        return K

    # one-dimensional reductions

    def marginal(self, t, order=12):
        """``m(t) = int phi(t, y) dy``, the density of ``x . nu``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        R = self.radius
        x, w = np.polynomial.legendre.leggauss(order)
        for idx, tt in enumerate(np.abs(t)):
            if tt >= R:
                continue
            ymax = math.sqrt(R * R - tt * tt)
            br = [0.0, ymax]
            if tt < 0.5:
                br.insert(1, math.sqrt(0.25 - tt * tt))
            total = 0.0
            for a, b in zip(br[:-1], br[1:]):
                y = 0.5 * (a + b) + 0.5 * (b - a) * x
                total += 0.5 * (b - a) * float(np.dot(w, self(np.hypot(tt, y))))
            out[idx] = 2.0 * total
        return out

    @cached_property
    def _profile_tables(self):
        R = self.radius
        inner = np.linspace(-0.5, 0.5, 1025)
        outer = np.linspace(0.5, R, 257)
        t = np.unique(np.concatenate([-outer, inner, outer]))
        m = self.marginal(t)
        # cumulative integral of the marginal with Gauss panels between nodes
        tq, wq = gauss_panels(t, 8)
        inc = (wq * self.marginal(tq)).reshape(-1, 8).sum(axis=1)
        lam = np.concatenate([[0.0], np.cumsum(inc)])
        lam /= lam[-1]
        return t, m, lam

    @cached_property
    def _ramp_spline(self):
        t, m, lam = self._profile_tables
        return CubicHermiteSpline(t, lam, m)

    def half_plane_profile(self, t):
        """Mollified Heaviside ``Lambda(t) = int_{x . nu <= t} phi``.

        Equal to 0 for ``t <= -radius`` and 1 for ``t >= radius``.
        """
        t = np.asarray(t, dtype=float)
        R = self.radius
        out = self._ramp_spline(np.clip(t, -R, R))
        out = np.where(t <= -R, 0.0, np.where(t >= R, 1.0, out))
        return out if out.ndim else float(out)
