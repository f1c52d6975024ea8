"""Detection of approximately one-dimensional gradients.

If mollifying ``f`` at radius ``r`` barely lowers its ``L1`` norm on a small
square ``Q``, then ``f`` is close to a half-line ``nu [0, inf)`` there. The
defect ``eta`` measures the loss and a direction is read off where the local
loss is smallest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import ConfigurationError, DirectionUndefinedError, DomainError
from .mollifier import MollifierSpec


@dataclass(frozen=True, eq=False)
class DetectionReport:
    """Outcome of :func:`one_dim_detect`.

    Attributes
    ----------
    direction : ndarray
        Unit vector in ``R^p``.
    eta : float
        Mollification defect on the window.
    residual1, residual2 : float
        ``int_Q (|f| - f . nu)`` and ``int_Q |f - nu (f . nu)_+|``.
    l1_norm : float
        ``int_Q |f|``.
    point : tuple
        Cell centre where the local defect is smallest.
    local_defect : float
        Local defect at ``point``.
    window_area : float
    """

    direction: np.ndarray
    eta: float
    residual1: float
    residual2: float
    l1_norm: float
    point: tuple
    local_defect: float
    window_area: float

    def to_dict(self):
        return {
            "direction": [float(v) for v in self.direction],
            "eta": self.eta,
            "residual1": self.residual1,
            "residual2": self.residual2,
            "l1_norm": self.l1_norm,
            "point": list(self.point),
            "local_defect": self.local_defect,
            "window_area": self.window_area,
        }


def gradient_field(values, spacing):
    """Forward-difference gradient of ``(nx, ny, N)`` data as ``(nx, ny, 2N)``.

    Components are ordered ``(d1 u_1, d2 u_1, ..., d1 u_N, d2 u_N)``; the last
    row and column use a zero difference.
    """
    u = np.asarray(values, dtype=float)
    if u.ndim == 2:
        u = u[..., None]
    dx = np.zeros_like(u)
    dy = np.zeros_like(u)
    dx[:-1] = (u[1:] - u[:-1]) / spacing
    dy[:, :-1] = (u[:, 1:] - u[:, :-1]) / spacing
    return np.stack([dx, dy], axis=-1).reshape(u.shape[:2] + (2 * u.shape[2],))


def window_half_side(r, n=2):
    """Half side ``r / 2**(2 + n/2)`` of the detection window."""
    return r / 2.0 ** (2 + 0.5 * n)


def one_dim_detect(f, spacing, r, center=(0.0, 0.0), origin=(0.0, 0.0), mollifier=None):
    """Find the best half-line direction for ``f`` on the window around ``center``.

    Parameters
    ----------
    f : ndarray, shape (nx, ny, p)
        Cell values of a gradient-like field.
    spacing : float
    r : float
        Mollification radius; the window is ``center + (-r/8, r/8)^2``.
    center : tuple of float
    origin : tuple of float
        Lower-left corner of the grid.
    mollifier : MollifierSpec, optional

    Returns
    -------
    DetectionReport

    Raises
    ------
    DirectionUndefinedError
        If ``f * psi_r`` vanishes on the whole window.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim == 2:
        f = f[..., None]
    if f.ndim != 3:
        raise DomainError("f must have shape (nx, ny, p)")
    mol = mollifier or MollifierSpec()
    K = mol.stencil(r, spacing)
    n = K.shape[0] // 2
    half = window_half_side(r)
    nx, ny = f.shape[:2]
    xc = origin[0] + spacing * (np.arange(nx) + 0.5)
    yc = origin[1] + spacing * (np.arange(ny) + 0.5)
    ix = np.flatnonzero(np.abs(xc - center[0]) < half)
    iy = np.flatnonzero(np.abs(yc - center[1]) < half)
    if not ix.size or not iy.size:
        raise ConfigurationError("detection window contains no cell centres")
    i0, i1, j0, j1 = ix[0], ix[-1] + 1, iy[0], iy[-1] + 1
    if i0 - n < 0 or j0 - n < 0 or i1 + n > nx or j1 + n > ny:
        raise ConfigurationError("grid does not cover the window enlarged by the mollifier radius")
    block = f[i0 - n : i1 + n, j0 - n : j1 + n]
    absf = np.linalg.norm(block, axis=-1)
    h2 = spacing * spacing
    A = fftconvolve(absf, K, mode="valid") * h2
    F = np.stack([fftconvolve(block[..., c], K, mode="valid") for c in range(f.shape[2])], axis=-1) * h2
    nF = np.linalg.norm(F, axis=-1)
    local = np.maximum(A - nF, 0.0)
    eta = float(np.sum(local)) * h2
    fq = f[i0:i1, j0:j1]
    scale = max(float(np.max(A)), 1e-300)
    live = nF > 1e-13 * scale
    if not live.any():
        raise DirectionUndefinedError("mollified field vanishes on the detection window")
    cand = np.where(live, local, np.inf)
    a, b = np.unravel_index(int(np.argmin(cand)), cand.shape)
    nu = F[a, b] / nF[a, b]
    proj = fq @ nu
    absq = np.linalg.norm(fq, axis=-1)
    r1 = float(np.sum(absq - proj)) * h2
    r2 = float(np.sum(np.linalg.norm(fq - np.maximum(proj, 0.0)[..., None] * nu, axis=-1))) * h2
    return DetectionReport(
        nu,
        eta,
        r1,
        r2,
        float(np.sum(absq)) * h2,
        (float(xc[i0 + a]), float(yc[j0 + b])),
        float(local[a, b]),
        (i1 - i0) * (j1 - j0) * h2,
    )


def sqrt_scaling_constant(report):
    """Ratio ``residual2 / sqrt(l1_norm * eta)``, zero when both vanish."""
    den = math.sqrt(max(report.l1_norm * report.eta, 0.0))
    if den == 0.0:
        return 0.0 if report.residual2 <= 1e-12 else math.inf
    return report.residual2 / den
