"""Projection of phase fields onto tile-constant integer fields.

A dyadic level ``k`` with ``eps^(1 - delta/2) <= 2^-k <= eps^(1 - delta)`` is
chosen, the inner region is tiled by squares of side ``2^-k-4`` and each tile
receives the lattice vector nearest to the average of the rounded field on
the enlarged square around it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..energy import (
    build_interaction_table,
    energy_total,
    nearest_lattice,
    p_form,
)
from ..errors import ConfigurationError, DomainError


def admissible_levels(eps, delta):
    """Integers ``k`` with ``eps^(1 - delta/2) <= 2^-k <= eps^(1 - delta)``."""
    L = math.log2(1.0 / eps)
    lo = math.ceil((1.0 - delta) * L - 1e-12)
    hi = math.floor((1.0 - 0.5 * delta) * L + 1e-12)
    return list(range(lo, hi + 1))


def jump_variation(values, spacing, mask=None):
    """Exact ``|Dv|`` of a cellwise constant field: jump norms times edge length."""
    v = np.asarray(values, dtype=float)
    if v.ndim == 2:
        v = v[..., None]
    m = np.ones(v.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    ex = m[1:] & m[:-1]
    ey = m[:, 1:] & m[:, :-1]
    jx = np.linalg.norm(v[1:] - v[:-1], axis=-1)
    jy = np.linalg.norm(v[:, 1:] - v[:, :-1], axis=-1)
    return (float(np.sum(jx[ex])) + float(np.sum(jy[ey]))) * spacing


@dataclass
class ProjectionReport:
    k: int
    tile: float
    candidates: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    variation: float = 0.0
    l1_error: float = 0.0
    energy_v: float = 0.0
    energy_u: float = 0.0

    @property
    def scaled_error(self):
        """``||u - v|| / (2^-k/2 sqrt(E[u]))``."""
        den = 2.0 ** (-0.5 * self.k) * math.sqrt(max(self.energy_u, 0.0))
        return self.l1_error / den if den > 0 else math.inf

    def to_dict(self):
        return {
            "k": self.k,
            "tile": self.tile,
            "candidates": {str(k): v for k, v in sorted(self.candidates.items())},
            "skipped": {str(k): v for k, v in sorted(self.skipped.items())},
            "variation": self.variation,
            "l1_error": self.l1_error,
            "energy_v": self.energy_v,
            "energy_u": self.energy_u,
        }

    def to_json(self, **kw):
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)


def _cell_range(a, b, origin, h, n):
    i0 = int(round((a - origin) / h))
    i1 = int(round((b - origin) / h))
    return max(i0, 0), min(i1, n)


def bv_project(field_, profile, eps, delta, omega, near_field_level=2):
    """Tile-constant integer projection of ``field_`` on the rectangle ``omega``.

    Parameters
    ----------
    field_ : SlipField
        The phase field on the whole grid.
    profile : AngularProfile
    eps : float
    delta : float
        In ``(0, 1/2)``.
    omega : tuple
        ``((x0, x1), (y0, y1))``; its edges must lie on tile boundaries of
        the chosen level.

    Returns
    -------
    k : int
    v : SlipField
        Integer field, zero outside ``omega``.
    report : ProjectionReport
    """
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta={delta!r} must lie in (0, 1/2)")
    if not 0.0 < eps < math.exp(-1.0):
        raise DomainError(f"eps={eps!r} must lie in (0, 1/e)")
    levels = admissible_levels(eps, delta)
    if not levels:
        raise ConfigurationError(
            f"no dyadic level k with eps^(1-delta/2) <= 2^-k <= eps^(1-delta) for eps={eps:g}, delta={delta:g}"
        )
    h = field_.spacing
    (x0, x1), (y0, y1) = omega
    ox, oy = field_.origin
    X1, Y1 = ox + h * field_.nx, oy + h * field_.ny
    margin = min(x0 - ox, X1 - x1, y0 - oy, Y1 - y1)
    ok, skipped = [], {}
    for k in levels:
        a = 2.0 ** (-k - 4)
        cells = a / h
        if cells < 1.0 - 1e-9 or abs(cells - round(cells)) > 1e-9:
            skipped[k] = f"tile side 2^-{k + 4} is not a multiple of the spacing {h:g}"
        elif margin < 2.0 ** (-k + 2) - 1e-12:
            skipped[k] = f"inner region is closer than 2^-{k - 2} to the boundary"
        elif any(abs(c / a - round(c / a)) > 1e-9 for c in (x0 - ox, x1 - ox, y0 - oy, y1 - oy)):
            skipped[k] = f"inner region is not aligned with tiles of side 2^-{k + 4}"
        else:
            ok.append(k)
    if not ok:
        raise ConfigurationError(f"no admissible level survives the grid checks: {skipped}")
    cand = {}
    for k in ok:
        tab = build_interaction_table(profile, k, h, near_field_level, k_min=k)
        cand[k] = p_form(tab, field_)
    k = min(ok, key=lambda j: (cand[j], j))
    a = 2.0 ** (-k - 4)
    c = int(round(a / h))
    i0, i1 = _cell_range(x0, x1, ox, h, field_.nx)
    j0, j1 = _cell_range(y0, y1, oy, h, field_.ny)
    w = nearest_lattice(field_.values)
    v = np.zeros_like(field_.values)
    for ti in range(i0, i1, c):
        for tj in range(j0, j1, c):
            blk = w[ti - c : ti + 2 * c, tj - c : tj + 2 * c]
            mean = blk.reshape(-1, blk.shape[-1]).mean(axis=0)
            v[ti : ti + c, tj : tj + c] = nearest_lattice(mean)
    mask = np.zeros((field_.nx, field_.ny), dtype=bool)
    mask[i0:i1, j0:j1] = True
    vf = field_.with_values(v)
    diff = np.linalg.norm(field_.values - v, axis=-1)
    rep = ProjectionReport(k, a, cand, skipped)
    rep.variation = jump_variation(v, h, mask)
    rep.l1_error = float(np.sum(diff[mask])) * h * h
    rep.energy_v = energy_total(profile, vf, eps, k_max=k, mask=mask, near_field_level=near_field_level).total
    rep.energy_u = energy_total(profile, field_, eps, near_field_level=near_field_level).total
    return k, vf, rep


def tile_constant(v, k, spacing, omega, origin=(0.0, 0.0)):
    """Check that ``v`` is constant on every tile of side ``2^-k-4`` inside ``omega``."""
    c = int(round(2.0 ** (-k - 4) / spacing))
    (x0, x1), (y0, y1) = omega
    i0, i1 = int(round((x0 - origin[0]) / spacing)), int(round((x1 - origin[0]) / spacing))
    j0, j1 = int(round((y0 - origin[1]) / spacing)), int(round((y1 - origin[1]) / spacing))
    for ti in range(i0, i1, c):
        for tj in range(j0, j1, c):
            blk = v[ti : ti + c, tj : tj + c]
            if not np.all(blk == blk[:1, :1]):
                return False
    return True
