"""Nonlocal quadratic form and phase-field energy on gridded slip fields.

Fields are piecewise constant on square cells. The quadratic form

``p(u) = sum_{a,b} (u_a - u_b) . W(a - b) (u_a - u_b)``

uses an interaction table ``W`` holding the kernel integrated over a pair of
cells. ``p`` is evaluated as ``sum_D W(D) : S(D)`` where the structure
function ``S(D) = sum_a m_a m_{a+D} (u_a - u_{a+D}) (u_a - u_{a+D})^T``
depends only on the field, so one ``S`` serves every layer table.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigurationError, DomainError
from .kernels import layer_support, phi_layer
from .quadrature import gauss_panels

log = logging.getLogger(__name__)

NEAR_FIELD_RADIUS = 3.0 * math.sqrt(2.0)  # in cells: three cell diagonals


@dataclass(frozen=True, eq=False)
class SlipField:
    """Vector field sampled at the centres of a uniform square grid.

    Parameters
    ----------
    values : ndarray, shape (nx, ny, N) or (nx, ny)
    spacing : float
        Cell side.
    origin : tuple of float
        Lower-left corner of the domain.
    """

    values: np.ndarray
    spacing: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[..., None]
        if v.ndim != 3:
            raise ValueError("values must have shape (nx, ny, N)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def nx(self):
        return self.values.shape[0]

    @property
    def ny(self):
        return self.values.shape[1]

    @property
    def n_components(self):
        return self.values.shape[2]

    @property
    def cell_area(self):
        return self.spacing**2

    def centers(self):
        """Cell-centre coordinates ``X, Y`` of shape ``(nx, ny)``."""
        h = self.spacing
        x = self.origin[0] + h * (np.arange(self.nx) + 0.5)
        y = self.origin[1] + h * (np.arange(self.ny) + 0.5)
        return np.meshgrid(x, y, indexing="ij")

    def with_values(self, values):
        return SlipField(values, self.spacing, self.origin)

    @classmethod
    def from_function(cls, func, nx, ny, spacing, origin=(0.0, 0.0)):
        """Sample ``func(X, Y)`` at cell centres."""
        h = float(spacing)
        x = origin[0] + h * (np.arange(nx) + 0.5)
        y = origin[1] + h * (np.arange(ny) + 0.5)
        X, Y = np.meshgrid(x, y, indexing="ij")
        return cls(np.asarray(func(X, Y), dtype=float), h, origin)


@dataclass(frozen=True, eq=False)
class InteractionTable:
    """Cell-pair integrals of a truncated kernel, stored densely by offset.

    ``weights[dx + ex, dy + ey]`` is the ``N x N`` matrix for offset
    ``(dx, dy)``; ``present`` marks offsets inside the truncation support.
    """

    k_min: int
    k_max: int
    spacing: float
    near_field_level: int
    weights: np.ndarray
    present: np.ndarray

    @property
    def radius(self):
        return (self.weights.shape[0] - 1) // 2, (self.weights.shape[1] - 1) // 2

    @property
    def n_components(self):
        return self.weights.shape[-1]

    def offsets(self):
        ex, ey = self.radius
        ix, iy = np.nonzero(self.present)
        return np.stack([ix - ex, iy - ey], axis=1)

    def contains(self, offset):
        ex, ey = self.radius
        dx, dy = int(offset[0]), int(offset[1])
        return abs(dx) <= ex and abs(dy) <= ey and bool(self.present[dx + ex, dy + ey])

    def matrix(self, offset):
        if not self.contains(offset):
            return np.zeros((self.n_components,) * 2)
        ex, ey = self.radius
        return self.weights[int(offset[0]) + ex, int(offset[1]) + ey]


def _radial_sum(k_min, k_max, r, dim=2):
    out = np.zeros_like(r)
    for k in range(k_min, k_max + 1):
        out += phi_layer(k, r, dim)
    return out


def _subcell_offsets(level):
    L = int(level)
    i = np.arange(-(L - 1), L)
    wi = (L - np.abs(i)).astype(float)
    w = (wi[:, None] * wi[None, :]) / float(L) ** 4
    ox = np.repeat(i / L, i.size)
    oy = np.tile(i / L, i.size)
    return ox, oy, w.ravel()


def cell_pair_integrals(profile, k_min, k_max, spacing, offsets, level, chunk=4096):
    """Subcell midpoint rule for the kernel integrated over pairs of cells.

    The ``level x level`` subcell differences collapse to ``(2L-1)**2``
    distinct vectors weighted by ``(L-|i|)(L-|j|)``.

    Parameters
    ----------
    offsets : array_like, shape (M, 2)
        Integer cell offsets, none of them zero.

    Returns
    -------
    ndarray, shape (M, N, N)
    """
    h = float(spacing)
    off = np.atleast_2d(np.asarray(offsets, dtype=float))
    if np.any(np.all(off == 0, axis=1)):
        raise DomainError("cell pair integral requested at zero offset")
    ox, oy, w = _subcell_offsets(level)
    n = profile.dimension
    out = np.empty((off.shape[0], n, n))
    for lo in range(0, off.shape[0], chunk):
        blk = off[lo : lo + chunk]
        zx = h * (blk[:, 0:1] + ox)
        zy = h * (blk[:, 1:2] + oy)
        rad = _radial_sum(k_min, k_max, np.hypot(zx, zy)) * w
        out[lo : lo + chunk] = h**4 * np.einsum("ab,abij->aij", rad, profile(np.arctan2(zy, zx)))
    return out


def cell_pair_integral(profile, k_min, k_max, spacing, offset, level):
    """Single-offset version of :func:`cell_pair_integrals`."""
    return cell_pair_integrals(profile, k_min, k_max, spacing, [offset], level)[0]


def _kink_radii(k_min, k_max):
    radii = []
    for k in range(max(k_min, 0), k_max + 1):
        radii += [2.0 ** (-k - 1), 2.0**-k]
    if k_min == -1:
        radii.append(1.0)
    return np.unique(radii)


@lru_cache(maxsize=16)
def _cached_table(profile, k_min, k_max, spacing, level, ex, ey):
    h = spacing
    n = profile.dimension
    dx = np.arange(-ex, ex + 1)
    dy = np.arange(-ey, ey + 1)
    DX, DY = np.meshgrid(dx, dy, indexing="ij")
    gx = np.maximum(np.abs(DX) - 1, 0)
    gy = np.maximum(np.abs(DY) - 1, 0)
    dmin = h * np.hypot(gx, gy)
    dmax = h * np.hypot(np.abs(DX) + 1, np.abs(DY) + 1)
    if k_min >= 0:
        present = dmin < layer_support(k_min)
    else:
        present = np.ones(DX.shape, dtype=bool)
    present[ex, ey] = False
    refine = present & (np.hypot(DX, DY) <= NEAR_FIELD_RADIUS)
    # pairs straddling a kink of the radial profile
    for rk in _kink_radii(k_min, k_max):
        refine |= present & (dmin < rk) & (dmax > rk)
    far = present & ~refine
    W = np.zeros(DX.shape + (n, n))
    zx, zy = h * DX[far], h * DY[far]
    rad = _radial_sum(k_min, k_max, np.hypot(zx, zy)) * h**4
    W[far] = rad[:, None, None] * profile(np.arctan2(zy, zx))
    half = refine & ((DX > 0) | ((DX == 0) & (DY > 0)))
    ia, ib = np.nonzero(half)
    if ia.size:
        offs = np.stack([DX[ia, ib], DY[ia, ib]], axis=1)
        M = cell_pair_integrals(profile, k_min, k_max, h, offs, level)
        M = 0.5 * (M + np.swapaxes(M, 1, 2))
        W[ia, ib] = M
        W[2 * ex - ia, 2 * ey - ib] = M
    # exact evenness of the far entries
    W = 0.5 * (W + W[::-1, ::-1])
    W.setflags(write=False)
    present.setflags(write=False)
    return InteractionTable(k_min, k_max, h, level, W, present)


def build_interaction_table(profile, k_max, spacing, near_field_level=4, k_min=0, max_offset=None):
    """Tabulate the truncated kernel ``sum_{k_min <= k <= k_max} Gamma_k`` over cell pairs.

    Parameters
    ----------
    profile : AngularProfile
    k_max : int
        Finest layer.
    spacing : float
        Cell side; must satisfy ``spacing <= 2**-k_max``.
    near_field_level : int
        Subcells per side for offsets within three cell diagonals and for
        cell pairs straddling a kink radius of the layers.
    k_min : int
        Coarsest layer; ``-1`` adds the far-field piece and then
        ``max_offset`` is required.
    max_offset : tuple of int, optional
        Largest offsets kept along each axis, typically the grid size minus
        one. Offsets beyond it cannot occur on the grid.

    Returns
    -------
    InteractionTable
    """
    k_min, k_max = int(k_min), int(k_max)
    if k_min < -1 or k_max < k_min:
        raise ConfigurationError("need -1 <= k_min <= k_max")
    if int(near_field_level) < 1:
        raise ConfigurationError("near_field_level must be >= 1")
    h = float(spacing)
    if k_max >= 0 and not h <= 2.0**-k_max:
        raise ConfigurationError(f"spacing {h:g} exceeds the finest layer support: need spacing <= 2^-k_max = {2.0**-k_max:g}")
    if k_min >= 0:
        e = int(math.ceil(layer_support(k_min) / h)) + 1
        ex = ey = e
    elif max_offset is None:
        raise ConfigurationError("the far-field layer has unbounded support; pass max_offset")
    else:
        ex = ey = 10**9
    if max_offset is not None:
        ex, ey = min(ex, int(max_offset[0])), min(ey, int(max_offset[1]))
    return _cached_table(profile, k_min, k_max, h, int(near_field_level), ex, ey)


# structure function


def _mask_array(field, mask):
    if mask is None:
        return np.ones((field.nx, field.ny))
    m = np.asarray(mask, dtype=bool)
    if m.shape != (field.nx, field.ny):
        raise ValueError("mask shape must match the grid")
    return m.astype(float)


def structure_function(field, radius, mask=None, method="fft"):
    """Pair-difference second moments ``S(D)`` for ``|D_x| <= ex, |D_y| <= ey``.

    Returns an array of shape ``(2ex+1, 2ey+1, N, N)``.
    """
    ex, ey = min(int(radius[0]), field.nx - 1), min(int(radius[1]), field.ny - 1)
    m = _mask_array(field, mask)
    u = field.values
    n = field.n_components
    if method == "direct":
        S = np.zeros((2 * ex + 1, 2 * ey + 1, n, n))
        for dx in range(-ex, ex + 1):
            for dy in range(-ey, ey + 1):
                S[dx + ex, dy + ey] = _pair_moment(u, m, dx, dy)
        return S
    if method != "fft":
        raise ValueError(f"unknown method {method!r}")
    # centring improves the cancellation in the correlation identities
    w = m.sum()
    if w > 0:
        u = u - (m[..., None] * u).sum(axis=(0, 1)) / w
    shape = (sfft.next_fast_len(field.nx + ex), sfft.next_fast_len(field.ny + ey))
    F = lambda a: sfft.rfftn(a, shape)  # noqa: E731
    Fm = F(m)
    Fu = [F(m * u[..., i]) for i in range(n)]
    S = np.zeros((2 * ex + 1, 2 * ey + 1, n, n))
    for i in range(n):
        for j in range(i, n):
            Fq = F(m * u[..., i] * u[..., j])
            spec = np.conj(Fq) * Fm + np.conj(Fm) * Fq - np.conj(Fu[i]) * Fu[j] - np.conj(Fu[j]) * Fu[i]
            c = sfft.irfftn(spec, shape)
            c = np.roll(c, (ex, ey), axis=(0, 1))[: 2 * ex + 1, : 2 * ey + 1]
            S[..., i, j] = c
            S[..., j, i] = c
    return S


def _pair_moment(u, m, dx, dy):
    nx, ny = m.shape
    xs = slice(max(0, -dx), min(nx, nx - dx))
    ys = slice(max(0, -dy), min(ny, ny - dy))
    xt = slice(max(0, dx), min(nx, nx + dx))
    yt = slice(max(0, dy), min(ny, ny + dy))
    mm = m[xs, ys] * m[xt, yt]
    d = u[xs, ys] - u[xt, yt]
    return np.einsum("xy,xyi,xyj->ij", mm, d, d)


def p_form(table, field, mask=None, method="fft", structure=None):
    """Quadratic form of ``field`` restricted to the cells selected by ``mask``.

    Parameters
    ----------
    table : InteractionTable
    field : SlipField
    mask : ndarray of bool, optional
        Cells of the region; both cells of a pair must be selected.
    method : {"fft", "direct"}
        ``"direct"`` sums pair differences offset by offset and is the
        reference path.
    structure : ndarray, optional
        Precomputed :func:`structure_function` covering the table radius.

    Returns
    -------
    float
    """
    if table.n_components != field.n_components:
        raise ValueError("table and field have different numbers of components")
    if not abs(table.spacing - field.spacing) <= 1e-12 * field.spacing:
        raise ConfigurationError("table spacing does not match the field")
    if mask is not None and not np.any(mask):
        log.info("p_form: empty mask, returning 0")
        return 0.0
    ex, ey = table.radius
    ex, ey = min(ex, field.nx - 1), min(ey, field.ny - 1)
    W = _central(table.weights, ex, ey)
    if method == "direct" and structure is None:
        m = _mask_array(field, mask)
        P = _central(table.present, ex, ey)
        terms = []
        for a, b in zip(*np.nonzero(P)):
            S = _pair_moment(field.values, m, a - ex, b - ey)
            terms.append(float(np.sum(W[a, b] * S)))
        return max(math.fsum(terms), 0.0)
    if structure is None:
        structure = structure_function(field, (ex, ey), mask, method=method)
    S = _central(structure, ex, ey)
    return max(float(np.sum(W * S)), 0.0)


def _central(a, ex, ey):
    cx, cy = (a.shape[0] - 1) // 2, (a.shape[1] - 1) // 2
    return a[cx - ex : cx + ex + 1, cy - ey : cy + ey + 1]


# energies


def dist_to_lattice(v):
    """Euclidean distance from ``v`` (last axis = components) to ``Z^N``.

    Rounding is half away from zero.
    """
    v = np.asarray(v, dtype=float)
    nearest = np.sign(v) * np.floor(np.abs(v) + 0.5)
    d = np.sqrt(np.sum((v - nearest) ** 2, axis=-1))
    return float(d) if d.ndim == 0 else d


def nearest_lattice(v):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Layer-resolved rescaled energy.

    ``total = (sum(layers) + penalty) * rescale``.
    """

    eps: float
    layers: dict = field(default_factory=dict)
    penalty: float = 0.0
    rescale: float = 1.0

    @property
    def nonlocal_part(self):
        return math.fsum(self.layers.values())

    @property
    def total(self):
        return (self.nonlocal_part + self.penalty) * self.rescale

    def to_dict(self):
        return {
            "eps": self.eps,
            "layers": {str(k): v for k, v in sorted(self.layers.items())},
            "penalty": self.penalty,
            "rescale": self.rescale,
            "total": self.total,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _check_eps(eps):
    eps = float(eps)
    if not 0.0 < eps < math.exp(-1.0):
        raise DomainError(f"eps={eps!r} must lie in (0, 1/e)")
    return eps


def penalty_term(field, eps, mask=None):
    """``(1/eps) * sum_cells dist^2(u, Z^N) * cell_area``."""
    d2 = dist_to_lattice(field.values) ** 2
    if mask is not None:
        d2 = d2[np.asarray(mask, dtype=bool)]
    return float(np.sum(d2)) * field.cell_area / eps


def default_k_max(spacing):
    """Finest layer with support at least one cell, ``2**-k >= spacing``."""
    return max(int(math.floor(math.log2(1.0 / spacing) + 1e-12)), 0)


def energy_total(profile, field, eps, k_max=None, mask=None, near_field_level=4, method="fft", include_far_field=False):
    """Rescaled phase-field energy with per-layer breakdown.

    Parameters
    ----------
    profile : AngularProfile
    field : SlipField
    eps : float
        Core width, ``0 < eps < 1/e``.
    k_max : int, optional
        Finest layer kept. Defaults to the finest layer the grid supports.
    mask : ndarray of bool, optional
    include_far_field : bool
        Add the unbounded far-field layer, restricted to the grid.

    Returns
    -------
    EnergyBreakdown
    """
    eps = _check_eps(eps)
    h = field.spacing
    if k_max is None:
        k_max = default_k_max(h)
    k_max = int(k_max)
    if 2.0**-k_max > 4.0 * h:
        warnings.warn(
            f"layers finer than 2^-{k_max} are dropped although the grid resolves them (spacing {h:g})",
            stacklevel=2,
        )
    ext = (field.nx - 1, field.ny - 1)
    ks = list(range(0, k_max + 1))
    if include_far_field:
        ks = [-1] + ks
    S = structure_function(field, ext, mask, method=method) if method == "fft" else None
    layers = {}
    for k in ks:
        tab = build_interaction_table(profile, k, h, near_field_level, k_min=k, max_offset=ext)
        layers[k] = p_form(tab, field, mask, method=method, structure=S)
    pen = penalty_term(field, eps, mask)
    return EnergyBreakdown(eps, layers, pen, 1.0 / math.log(1.0 / eps))


# exact evaluation for planar profiles on the unit disk


class _AngularMoments:
    """Cumulative moments ``I0(b) = int_0^b G`` and ``I1(b) = int_0^b G tan``.

    ``G(a) = cos(a) (g(a) + g(-a))`` with ``g(a) = s.Ghat(theta_nu + a) s``.
    """

    def __init__(self, profile, theta_nu, s, n=1024, order=8):
        s = np.asarray(s, dtype=float)
        self.g = lambda a: np.einsum("i,...ij,j->...", s, profile(theta_nu + a), s)
        br = np.linspace(0.0, 0.5 * math.pi, n + 1)
        kn = profile.knots()
        if kn.size:
            rel = np.mod(np.concatenate([kn - theta_nu, theta_nu - kn]), 2 * math.pi)
            rel = np.where(rel > math.pi, rel - 2 * math.pi, rel)
            rel = rel[(rel > 0) & (rel < 0.5 * math.pi)]
            br = np.unique(np.concatenate([br, rel]))
        x, w = gauss_panels(br, order)
        inc0 = (w * self.G(x)).reshape(-1, order).sum(axis=1)
        inc1 = (w * self._G_tan(x)).reshape(-1, order).sum(axis=1)
        I0 = np.concatenate([[0.0], np.cumsum(inc0)])
        I1 = np.concatenate([[0.0], np.cumsum(inc1)])
        Gb = self.G(br)
        self.I0 = CubicHermiteSpline(br, I0, Gb)
        self.I1 = CubicHermiteSpline(br, I1, self._G_tan(br))
        self.total = float(I0[-1])

    def G(self, a):
        return np.cos(a) * (self.g(a) + self.g(-a))

    def _G_tan(self, a):
        return np.sin(a) * (self.g(a) + self.g(-a))


def _disk_mesh(eps, support, n_inner=8, ratio=1.5, edge_levels=14):
    """Symmetric panel breaks on (-1, 1) refined at the interface and the rim."""
    a = support * eps
    inner = np.linspace(-a, a, 2 * n_inner + 1)
    extra = [-0.5 * eps, 0.5 * eps]
    pos = [a]
    while pos[-1] * ratio < 0.5:
        pos.append(pos[-1] * ratio)
    pos.append(0.5)
    rim = [1.0 - 0.5 * 2.0**-j for j in range(1, edge_levels)]
    pos = np.array(pos + rim + [1.0])
    br = np.unique(np.concatenate([inner, extra, pos, -pos]))
    return br


def _triangle_rule(A, B, C, x, w):
    """Collapsed tensor rule on triangle ABC from a 1D rule on [0, 1]."""
    U, V = np.meshgrid(x, x, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    A, B, C = (np.asarray(p, dtype=float) for p in (A, B, C))
    P = A + U[..., None] * (B - A) + (U * V)[..., None] * (C - B)
    det = abs((B[0] - A[0]) * (C[1] - A[1]) - (B[1] - A[1]) * (C[0] - A[0]))
    return P[..., 0].ravel(), P[..., 1].ravel(), (WU * WV * U * det).ravel()


def _planar_nodes(br, order):
    x, w = np.polynomial.legendre.leggauss(order)
    x01, w01 = 0.5 * (x + 1.0), 0.5 * w
    n = br.size - 1
    mid = 0.5 * (br[:-1] + br[1:])
    T1, T2, WW = [], [], []
    mirror = {i: j for i in range(n) for j in range(n) if abs(mid[i] + mid[j]) < 1e-14 * max(1.0, abs(mid[i]))}
    for i in range(n):
        a1, b1 = br[i], br[i + 1]
        for j in range(n):
            a2, b2 = br[j], br[j + 1]
            if i == j:
                tris = [((a1, a2), (b1, a2), (b1, b2)), ((a1, a2), (b1, b2), (a1, b2))]
            elif mirror.get(i) == j:
                tris = [((a1, b2), (b1, a2), (b1, b2)), ((a1, b2), (a1, a2), (b1, a2))]
            else:
                tris = None
            if tris is None:
                t1 = a1 + (b1 - a1) * x01
                t2 = a2 + (b2 - a2) * x01
                P, Q = np.meshgrid(t1, t2, indexing="ij")
                Wq = np.outer(w01 * (b1 - a1), w01 * (b2 - a2))
                T1.append(P.ravel())
                T2.append(Q.ravel())
                WW.append(Wq.ravel())
            else:
                for tri in tris:
                    p, q, wq = _triangle_rule(*tri, x01, w01)
                    T1.append(p)
                    T2.append(q)
                    WW.append(wq)
    return np.concatenate(T1), np.concatenate(T2), np.concatenate(WW)


def planar_interface_energy(profile, nu, s, eps, ramp, support, order=8, n_inner=8, angular_cells=1024):
    """Energy of ``u(x) = s * ramp(x . nu / eps)`` on the unit disk, full kernel.

    The disk integral is reduced exactly to the normal coordinates
    ``(t1, t2)``: the tangential double integral of the kernel against the
    chord overlap has a closed form in the angular moments of the profile.

    Parameters
    ----------
    profile : AngularProfile
    nu : array_like
        Unit normal.
    s : array_like
        Jump vector.
    eps : float
        Core width in ``(0, 1/e)``.
    ramp : callable
        Transition profile with ``ramp(t) = 0`` for ``t <= -support`` and
        ``1`` for ``t >= support``.
    support : float
        Half width of the transition in units of ``eps``.

    Returns
    -------
    EnergyBreakdown
        ``layers`` holds the whole nonlocal term under key ``"all"``.
    """
    eps = _check_eps(eps)
    nu = np.asarray(nu, dtype=float)
    if abs(np.hypot(*nu) - 1.0) > 1e-12:
        raise DomainError("nu must be a unit vector")
    s = np.asarray(s, dtype=float).ravel()
    rescale = 1.0 / math.log(1.0 / eps)
    if not np.any(s):
        return EnergyBreakdown(eps, {"all": 0.0}, 0.0, rescale)
    mom = _AngularMoments(profile, math.atan2(nu[1], nu[0]), s, n=angular_cells)
    br = _disk_mesh(eps, support, n_inner=n_inner)
    t1, t2, w = _planar_nodes(br, order)
    lam1, lam2 = ramp(t1 / eps), ramp(t2 / eps)
    dl = lam1 - lam2
    keep = dl != 0.0
    t1, t2, w, dl = t1[keep], t2[keep], w[keep], dl[keep]
    tau = np.abs(t1 - t2)
    c1 = np.sqrt(np.maximum(1.0 - t1 * t1, 0.0))
    c2 = np.sqrt(np.maximum(1.0 - t2 * t2, 0.0))
    a1 = np.arctan2(np.abs(c1 - c2), tau)
    a2 = np.arctan2(c1 + c2, tau)
    I0a, I0b = mom.I0(a1), mom.I0(a2)
    I1a, I1b = mom.I1(a1), mom.I1(a2)
    H = 2.0 * np.minimum(c1, c2) * I0a + (c1 + c2) * (I0b - I0a) - tau * (I1b - I1a)
    nonlocal_part = float(np.sum(w * (dl / tau) ** 2 * H))
    # penalty: only the transition layer is off the lattice
    tp, wp = gauss_panels(br[np.abs(br) <= support * eps + 1e-15], order)
    lam = ramp(tp / eps)
    d2 = dist_to_lattice(np.outer(lam, s)) ** 2
    pen = float(np.sum(wp * 2.0 * np.sqrt(1.0 - tp * tp) * d2)) / eps
    return EnergyBreakdown(eps, {"all": nonlocal_part}, pen, rescale)
