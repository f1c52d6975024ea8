"""Line-tension densities of flat interfaces.

For a straight interface with unit normal ``nu`` and jump ``s`` the density
is ``gamma0(nu, s) = s . G(nu) s`` with

``G(nu) = 2 int_{-pi/2}^{pi/2} cos(a) Ghat(theta_nu + a) da``.

Every dyadic layer carries the same one-dimensional energy
``ln(2) * a . G(nu) a`` for a unit interface with jump ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec

from .energy import SlipField, build_interaction_table, p_form
from .errors import ConfigurationError, DomainError
from .kernels import AngularProfile, layer_support, phi_layer
from .quadrature import gauss_panels


def _unit(nu):
    nu = np.asarray(nu, dtype=float).ravel()
    if nu.shape != (2,) or abs(math.hypot(nu[0], nu[1]) - 1.0) > 1e-12:
        raise DomainError(f"normal {nu} is not a unit 2-vector")
    return nu


def normal_angle(nu):
    nu = _unit(nu)
    return math.atan2(nu[1], nu[0])


def unit_normal(theta):
    return np.array([math.cos(theta), math.sin(theta)])


@dataclass(frozen=True, eq=False)
class LineTensionMatrix:
    """Symmetric matrix ``G`` with ``gamma0(nu, s) = s . G s``."""

    nu: np.ndarray
    matrix: np.ndarray

    def energy(self, s):
        s = np.asarray(s, dtype=float)
        return float(s @ self.matrix @ s)

    def to_dict(self):
        return {"nu": [float(v) for v in self.nu], "matrix": self.matrix.tolist()}


def _knot_points(profile, theta_nu):
    kn = profile.knots()
    if not kn.size:
        return None
    a = np.mod(kn - theta_nu + math.pi, 2.0 * math.pi) - math.pi
    a = np.concatenate([a, a - math.pi, a + math.pi])
    a = np.unique(a[(a > -0.5 * math.pi) & (a < 0.5 * math.pi)])
    return list(a) if a.size else None


def gamma0(profile, nu, epsabs=1e-10):
    """Line-tension matrix for the normal ``nu``.

    Adaptive Gauss-Kronrod quadrature of the angular integral, with panels
    split at the table knots of sampled profiles.

    Returns
    -------
    LineTensionMatrix
    """
    nu = _unit(nu)
    th = math.atan2(nu[1], nu[0])
    n = profile.dimension

    def f(a):
        return (math.cos(a) * profile(th + a)).ravel()

    val, _ = quad_vec(f, -0.5 * math.pi, 0.5 * math.pi, epsabs=epsabs, epsrel=1e-12, points=_knot_points(profile, th))
    G = 2.0 * np.asarray(val).reshape(n, n)
    G = 0.5 * (G + G.T)
    return LineTensionMatrix(nu.copy(), G)


def gamma1d_layer(profile, nu, a, k=0):
    """One-dimensional layer energy ``ln(2) * a . G(nu) a``; independent of ``k``."""
    if int(k) < 0:
        raise DomainError("layer index must be >= 0")
    a = np.asarray(a, dtype=float)
    return math.log(2.0) * gamma0(profile, nu).energy(a)


def gamma1d_layer_quadrature(profile, nu, a, k, panels=48, order=4):
    """Slow path: the defining triple integral for a unit interface.

    ``2 int_0^R int_0^R int_{-R}^{R} a . Gamma_k((t1 + t2) nu + s nu_perp) a``
    with ``R = 2**-k`` the layer support, by tensorised Gauss rules.
    """
    nu = _unit(nu)
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        return 0.0
    R = layer_support(k)
    perp = np.array([-nu[1], nu[0]])
    t, wt = gauss_panels(np.linspace(0.0, R, panels + 1), order)
    s, ws = gauss_panels(np.linspace(-R, R, 2 * panels + 1), order)
    total = 0.0
    T2, S = np.meshgrid(t, s, indexing="ij")
    W2 = np.outer(wt, ws)
    for t1, w1 in zip(t, wt):
        T = t1 + T2
        zx = T * nu[0] + S * perp[0]
        zy = T * nu[1] + S * perp[1]
        r = np.hypot(zx, zy)
        rad = phi_layer(k, r)
        live = rad > 0
        g = np.einsum("i,nij,j->n", a, profile(np.arctan2(zy[live], zx[live])), a)
        total += w1 * float(np.sum(W2[live] * rad[live] * g))
    return 2.0 * total


def kco_matrix(poisson, theta):
    """Cubic-symmetry line-tension matrix for orthogonal Burgers vectors.

    ``theta`` is the angle of the interface normal.
    """
    nt = float(poisson)
    if not -1.0 <= nt < 0.5:
        raise DomainError(f"Poisson ratio {nt} must lie in [-1, 1/2)")
    s2, c2 = math.sin(theta) ** 2, math.cos(theta) ** 2
    off = nt * math.sin(2.0 * theta)
    M = np.array([[2.0 - 2.0 * nt * s2, off], [off, 2.0 - 2.0 * nt * c2]])
    return M / (4.0 * math.pi * (1.0 - nt))


def kco_line_tension(poisson, theta, s):
    """Closed-form cubic line tension and its matrix.

    Returns
    -------
    value : float
    matrix : LineTensionMatrix
    """
    G = kco_matrix(poisson, theta)
    s = np.asarray(s, dtype=float)
    if s.shape != (2,):
        raise DomainError("the cubic line tension needs a 2-vector jump")
    ltm = LineTensionMatrix(unit_normal(theta), G)
    return ltm.energy(s), ltm


# tension providers


class ProfileTension:
    """Line tensions computed from an angular profile, cached per normal."""

    def __init__(self, profile: AngularProfile):
        self.profile = profile
        self.dimension = profile.dimension
        self._cache: dict = {}

    def matrix(self, nu):
        key = (round(float(nu[0]), 14), round(float(nu[1]), 14))
        if key not in self._cache:
            self._cache[key] = gamma0(self.profile, nu).matrix
        return self._cache[key]

    def __repr__(self):
        return f"ProfileTension({self.profile.mode}, N={self.dimension})"


class KCOTension:
    """Closed-form cubic line tension as a provider."""

    dimension = 2

    def __init__(self, poisson):
        kco_matrix(poisson, 0.0)
        self.poisson = float(poisson)

    def matrix(self, nu):
        nu = _unit(nu)
        return kco_matrix(self.poisson, math.atan2(nu[1], nu[0]))

    def __repr__(self):
        return f"KCOTension(poisson={self.poisson})"


# per-jump separation on a window


@dataclass
class StaircaseReport:
    """Quadratic form of a monotone staircase against its per-jump lower bound."""

    p_value: float
    bound: float
    per_jump: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def ratio(self):
        return self.p_value / self.bound if self.bound > 0 else float("nan")


def _chord_length(nu, t, lo, hi):
    """Length of ``{x . nu = t}`` inside the square ``[lo, hi]^2``."""
    perp = np.array([-nu[1], nu[0]])
    base = t * nu
    s_lo, s_hi = -np.inf, np.inf
    for d in range(2):
        if abs(perp[d]) < 1e-15:
            if not lo <= base[d] <= hi:
                return 0.0
            continue
        a = (lo - base[d]) / perp[d]
        b = (hi - base[d]) / perp[d]
        s_lo, s_hi = max(s_lo, min(a, b)), min(s_hi, max(a, b))
    return max(s_hi - s_lo, 0.0)


def staircase_energy(profile, nu, positions, vectors, k, window, spacing, u0=None, near_field_level=4):
    """Layer-``k`` quadratic form of a staircase on ``[0, window]^2``.

    The field is ``u0 + sum_j vectors[j] * [x . nu >= positions[j]]``. All jump
    vectors must be positive multiples of one direction (a monotone profile).
    The lower bound sums ``ln(2) [u]_j . G(nu) [u]_j`` times the chord of
    each jump line inside the reduced square ``[2**-k, window - 2**-k]^2``.

    Returns
    -------
    StaircaseReport
    """
    nu = _unit(nu)
    pos = np.asarray(positions, dtype=float).ravel()
    vec = np.asarray(vectors, dtype=float).reshape(pos.size, -1) if pos.size else np.zeros((0, profile.dimension))
    n = profile.dimension
    if vec.shape[1] != n:
        raise DomainError("jump vectors must have the profile dimension")
    cells = window / spacing
    if abs(cells - round(cells)) > 1e-9:
        raise ConfigurationError("window must be an integer number of cells")
    cells = int(round(cells))
    if pos.size:
        ref = vec[np.argmax(np.linalg.norm(vec, axis=1))]
        ref = ref / np.linalg.norm(ref)
        for v in vec:
            if np.linalg.norm(v - (v @ ref) * ref) > 1e-12 * max(1.0, np.linalg.norm(v)) or v @ ref <= 0:
                raise DomainError("jumps are not positive multiples of one direction (profile not monotone)")
    base = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float)
    x = spacing * (np.arange(cells) + 0.5)
    X, Y = np.meshgrid(x, x, indexing="ij")
    proj = X * nu[0] + Y * nu[1]
    vals = np.broadcast_to(base, X.shape + (n,)).copy()
    for t, v in zip(pos, vec):
        vals += (proj >= t)[..., None] * v
    fld = SlipField(vals, spacing)
    table = build_interaction_table(profile, k, spacing, near_field_level, k_min=k)
    p = p_form(table, fld) if pos.size else 0.0
    G = gamma0(profile, nu)
    margin = layer_support(k)
    rows, flags = [], []
    for j, (t, v) in enumerate(zip(pos, vec)):
        length = _chord_length(nu, t, margin, window - margin)
        b = math.log(2.0) * G.energy(v) * length
        rows.append({"position": float(t), "vector": v.tolist(), "length": length, "bound": b})
        if length <= 0.0:
            flags.append(f"jump {j} at {t:g} misses the reduced window (margin 2^-{k} = {margin:g})")
    return StaircaseReport(p, math.fsum(r["bound"] for r in rows), rows, flags)
