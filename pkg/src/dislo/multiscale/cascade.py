"""Iterated mollification from fine to coarse scales.

Starting from a field ``v`` at level ``k``, the level-``h`` field is
``u_h = u_{h+m} * phi_h`` on a domain ``D_h`` eroded from ``D_{h+m}`` by
the stencil footprint. The total variation can only drop along the cascade,
and levels where it barely drops are flagged as good.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from ..energy import SlipField, build_interaction_table, p_form, structure_function
from ..errors import ConfigurationError
from .mollifier import MollifierSpec


def _tv_cells(mask):
    """Cells whose right and upper neighbours are also in ``mask``."""
    t = mask.copy()
    t[-1, :] = False
    t[:, -1] = False
    t[:-1, :] &= mask[1:, :]
    t[:, :-1] &= mask[:, 1:]
    return t


def _erode(mask, footprint):
    """Binary erosion with zero border, counting covered cells by FFT."""
    fp = footprint.astype(float)
    pad = footprint.shape[0] // 2
    m = np.pad(mask.astype(float), pad)
    cnt = fftconvolve(m, fp[::-1, ::-1], mode="valid")
    return cnt > fp.sum() - 0.5


def total_variation(values, spacing, mask=None):
    """Discrete ``|Du|``: forward differences, Euclidean norm over all components.

    ``values`` has shape ``(nx, ny, N)``. Only cells whose forward neighbours
    lie in ``mask`` contribute.
    """
    u = np.asarray(values, dtype=float)
    if u.ndim == 2:
        u = u[..., None]
    m = np.ones(u.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    t = _tv_cells(m)
    dx = np.zeros_like(u)
    dy = np.zeros_like(u)
    dx[:-1] = u[1:] - u[:-1]
    dy[:, :-1] = u[:, 1:] - u[:, :-1]
    g = np.sqrt(np.sum(dx * dx + dy * dy, axis=-1))
    # |grad u| * h^2 with grad = diff / h
    return float(np.sum(g[t])) * spacing


@dataclass
class ScaleCascade:
    """Per-level fields, domains, total variations and good-scale flags."""

    k: int
    m: int
    spacing: float
    levels: list = field(default_factory=list)
    fields: dict = field(default_factory=dict)
    masks: dict = field(default_factory=dict)
    tv: dict = field(default_factory=dict)
    defects: dict = field(default_factory=dict)
    local_defects: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)
    good_tv: dict = field(default_factory=dict)
    good_energy: dict = field(default_factory=dict)
    threshold: float = 0.0
    truncated: bool = False

    def good(self, h):
        """Conjunction of the TV filter and, when evaluated, the energy filter."""
        e = self.good_energy.get(h)
        return bool(self.good_tv.get(h)) and (e is None or e)

    def good_levels(self):
        return [h for h in sorted(self.defects) if self.good(h)]

    def telescoping_gap(self):
        """``sum_h defect_h`` minus its closed form from the end levels."""
        hs = sorted(self.defects)
        if not hs:
            return 0.0
        lo, hi = hs[0], hs[-1]
        top = math.fsum(self.tv[h] for h in range(hi + 1, hi + self.m + 1))
        bottom = math.fsum(self.tv[h] for h in range(lo, lo + self.m))
        return math.fsum(self.defects.values()) - (top - bottom)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "tv", "defect", "local_defect", "good_tv", "good_energy", "good"])
        for h in self.levels:
            d = self.defects.get(h)
            ge = self.good_energy.get(h)
            w.writerow(
                [
                    h,
                    repr(self.tv[h]),
                    "" if d is None else repr(d),
                    "" if h not in self.local_defects else repr(self.local_defects[h]),
                    "" if d is None else int(self.good_tv[h]),
                    "" if ge is None else int(ge),
                    "" if d is None else int(self.good(h)),
                ]
            )
        return buf.getvalue()


def mollify_cascade(
    field_,
    k,
    m=3,
    mollifier=None,
    domain=None,
    budget=1.0,
    zeta=0.25,
    profile=None,
    t=2,
    h_min=0,
):
    """Mollify ``field_`` level by level from ``k + m`` down to ``h_min``.

    Parameters
    ----------
    field_ : SlipField
        The finest field ``v``; levels ``k..k+m`` all equal ``v``.
    k : int
        Finest mollification level.
    m : int
        Level step, at least 3.
    mollifier : MollifierSpec, optional
    domain : ndarray of bool, optional
        Working domain, the whole grid by default.
    budget, zeta : float
        A level is TV-good when its defect is at most ``budget * m / (k * zeta)``.
    profile : AngularProfile, optional
        Enables the energy filter: ``p_{h+t}(v) <= (1 + 5 zeta) * mean_j p_j(v)``.
    t : int
        Layer shift of the energy filter.

    Returns
    -------
    ScaleCascade
    """
    k, m = int(k), int(m)
    if m < 3:
        raise ConfigurationError("level step m must be at least 3")
    if k < 1:
        raise ConfigurationError("finest level k must be at least 1")
    h_sp = field_.spacing
    if h_sp > 2.0**-k:
        raise ConfigurationError(f"grid spacing {h_sp:g} does not resolve level {k}: need spacing <= 2^-k")
    mol = mollifier or MollifierSpec()
    v = field_.values
    D0 = np.ones((field_.nx, field_.ny), dtype=bool) if domain is None else np.asarray(domain, dtype=bool)
    casc = ScaleCascade(k, m, h_sp, threshold=budget * m / (k * zeta))
    for h in range(k + m, k - 1, -1):
        casc.levels.append(h)
        casc.fields[h] = v
        casc.masks[h] = D0
        casc.tv[h] = total_variation(v, h_sp, D0)
    for h in range(k - 1, int(h_min) - 1, -1):
        src, Dsrc = casc.fields[h + m], casc.masks[h + m]
        K = mol.stencil(2.0**-h, h_sp)
        D = _erode(Dsrc, K > 0)
        if not D.any():
            casc.truncated = True
            break
        out = np.zeros_like(v)
        for i in range(v.shape[-1]):
            out[..., i] = fftconvolve(np.where(Dsrc, src[..., i], 0.0), K, mode="same") * h_sp**2
        out[~D] = 0.0
        casc.levels.append(h)
        casc.fields[h] = out
        casc.masks[h] = D
        casc.tv[h] = total_variation(out, h_sp, D)
        casc.local_defects[h] = total_variation(src, h_sp, D) - casc.tv[h]
        diff = np.sqrt(np.sum((out - src) ** 2, axis=-1))
        casc.drift[h] = float(np.sum(diff[D])) * h_sp**2
    for h in casc.levels:
        if h + m in casc.tv and h <= k:
            casc.defects[h] = casc.tv[h + m] - casc.tv[h]
            casc.good_tv[h] = casc.defects[h] <= casc.threshold
    if profile is not None:
        _energy_filter(casc, field_, profile, zeta, t, D0)
    return casc


def _energy_filter(casc, field_, profile, zeta, t, domain):
    h_sp = field_.spacing
    j_max = min(casc.k + t, int(math.floor(math.log2(1.0 / h_sp) + 1e-12)))
    ext = (field_.nx - 1, field_.ny - 1)
    S = structure_function(field_, ext, domain)
    p = {}
    for j in range(0, j_max + 1):
        tab = build_interaction_table(profile, j, h_sp, k_min=j, max_offset=ext)
        p[j] = p_form(tab, field_, domain, structure=S)
    if casc.k > j_max:
        return
    mean = math.fsum(p[j] for j in range(0, casc.k + 1)) / casc.k
    for h in casc.defects:
        if h + t in p:
            casc.good_energy[h] = p[h + t] <= (1.0 + 5.0 * zeta) * mean
