"""Singular interaction kernels and their dyadic layer decomposition.

The kernel is ``Gamma(z) = |z|**-(d+1) * Ghat(z/|z|)`` where ``Ghat`` is a
matrix-valued angular profile. It is split into bounded layers

``phi_k(r) = 2**(3(k+1)) - 2**(3k)`` for ``r <= 2**(-k-1)``,
``phi_k(r) = r**-3 - 2**(3k)`` for ``2**(-k-1) < r <= 2**-k`` and zero
beyond, plus a far-field piece ``phi_{-1}``. The layers sum to ``r**-3``.

Angles are measured counterclockwise from the positive x-axis.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, ProfileError
from .quadrature import gauss_panels

TWO_PI = 2.0 * math.pi

_CLOSED_FORMS: dict[str, tuple[int, Callable[[np.ndarray], np.ndarray]]] = {}


def register_closed_form(name, dimension, func):
    """Register a closed-form angular profile under ``name``.

    ``func`` maps an array of angles of shape ``(...)`` to matrices of
    shape ``(..., N, N)``. It must be even under ``theta -> theta + pi``.
    """
    _CLOSED_FORMS[str(name)] = (int(dimension), func)


def closed_form_names():
    return sorted(_CLOSED_FORMS)


def _uniaxial(theta):
    # I + e_theta e_theta^T / 2
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(np.shape(theta) + (2, 2))
    out[..., 0, 0] = 1.0 + 0.5 * c * c
    out[..., 1, 1] = 1.0 + 0.5 * s * s
    out[..., 0, 1] = out[..., 1, 0] = 0.5 * c * s
    return out


def _scalar_cos2(theta):
    return (1.0 + 0.4 * np.cos(2.0 * theta))[..., None, None]


register_closed_form("uniaxial", 2, _uniaxial)
register_closed_form("scalar-cos2", 1, _scalar_cos2)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AngularProfile:
    """Matrix-valued angular factor of the kernel.

    Use the constructors :meth:`isotropic`, :meth:`from_table` and
    :meth:`closed_form` rather than calling the class directly.

    Attributes
    ----------
    dimension : int
        Number of slip components ``N``.
    mode : str
        One of ``"isotropic"``, ``"table"`` or ``"closed-form"``.
    bound : float
        Ellipticity constant ``c``: every eigenvalue lies in ``[1/c, c]``.
    offset : float
        Rotation angle; the profile is evaluated at ``theta - offset``.
    """

    dimension: int
    mode: str
    bound: float
    scale: float = 1.0
    angles: np.ndarray | None = None
    matrices: np.ndarray | None = None
    callback: str | None = None
    offset: float = 0.0
    _ext: tuple = field(default=(), repr=False)

    # construction

    @classmethod
    def isotropic(cls, dimension=1, scale=1.0):
        if dimension < 1:
            raise ProfileError("dimension must be positive")
        if not scale > 0:
            raise ProfileError("isotropic scale must be positive")
        c = max(scale, 1.0 / scale)
        return cls(int(dimension), "isotropic", c, scale=float(scale))

    @classmethod
    def from_table(cls, angles, matrices, bound=None, degrees=False):
        """Profile interpolated piecewise-linearly from sampled matrices.

        Parameters
        ----------
        angles : array_like, shape (M,)
            Strictly increasing angles in ``[0, 2pi)`` (or ``[0, 360)`` with
            ``degrees=True``). If every angle is below ``pi`` the table is
            extended to the full circle by evenness.
        matrices : array_like, shape (M, N, N)
        bound : float, optional
            Declared ellipticity constant. Computed from the knots if omitted.
        """
        th = np.asarray(angles, dtype=float).ravel()
        mats = np.asarray(matrices, dtype=float)
        if degrees:
            th = np.deg2rad(th)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[0] != th.size:
            raise ProfileError("matrices must have shape (len(angles), N, N)")
        if th.size < 2:
            raise ProfileError("a table needs at least two angles")
        if np.any(np.diff(th) <= 0):
            raise ProfileError("table angles must be strictly increasing")
        if th[0] < 0 or th[-1] >= TWO_PI:
            raise ProfileError("table angles must lie in [0, 2pi)")
        if not np.allclose(mats, np.swapaxes(mats, 1, 2), rtol=0, atol=1e-12 * np.abs(mats).max()):
            raise ProfileError("table matrices must be symmetric")
        if th[-1] < math.pi:
            th = np.concatenate([th, th + math.pi])
            mats = np.concatenate([mats, mats])
        mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
        rel = th - th[0]
        ext = (th[0], np.append(rel, TWO_PI), np.concatenate([mats, mats[:1]]))
        prof = cls(mats.shape[1], "table", 1.0, angles=_frozen(th), matrices=_frozen(mats), _ext=ext)
        return prof._checked(bound, th)

    @classmethod
    def closed_form(cls, name, bound=None, n_check=720):
        """Profile evaluated by a registered callback."""
        if name not in _CLOSED_FORMS:
            raise ProfileError(f"unknown closed-form profile {name!r}; known: {closed_form_names()}")
        dim, _ = _CLOSED_FORMS[name]
        prof = cls(dim, "closed-form", 1.0, callback=name)
        return prof._checked(bound, np.linspace(0.0, TWO_PI, n_check, endpoint=False))

    @classmethod
    def from_function(cls, func, n_angles=72, bound=None):
        """Tabulate ``func(theta) -> (N, N)`` on a uniform grid of the half circle."""
        th = np.linspace(0.0, math.pi, int(n_angles), endpoint=False)
        mats = np.array([func(t) for t in th], dtype=float)
        return cls.from_table(th, mats, bound=bound)

    def _checked(self, bound, sample):
        mats = self(sample)
        if not np.allclose(mats, np.swapaxes(mats, -1, -2), rtol=0, atol=1e-12 * np.abs(mats).max()):
            raise ProfileError("profile matrices are not symmetric")
        shifted = self(sample + math.pi)
        if not np.allclose(mats, shifted, rtol=1e-9, atol=1e-12):
            raise ProfileError("profile is not even: Ghat(theta + pi) != Ghat(theta)")
        ev = np.linalg.eigvalsh(mats)
        lo, hi = float(ev.min()), float(ev.max())
        if lo <= 0:
            raise ProfileError("profile is not positive definite")
        tight = max(hi, 1.0 / lo)
        if bound is None:
            bound = tight
        elif tight > bound * (1 + 1e-12):
            raise ProfileError(f"eigenvalues in [{lo:.6g}, {hi:.6g}] violate declared bound c={bound}")
        # linear interpolation of entries keeps eigenvalues inside the knot range
        return replace(self, bound=float(bound))

    def rotated(self, phi):
        """Profile composed with a rotation by ``phi``: ``Ghat'(theta) = Ghat(theta - phi)``."""
        return replace(self, offset=self.offset + float(phi))

    # evaluation

    def __call__(self, theta):
        """Matrices at angles ``theta`` (any shape), returned as ``(..., N, N)``."""
        theta = np.asarray(theta, dtype=float) - self.offset
        n = self.dimension
        if self.mode == "isotropic":
            return np.broadcast_to(self.scale * np.eye(n), theta.shape + (n, n)).copy()
        if self.mode == "closed-form":
            return np.asarray(_CLOSED_FORMS[self.callback][1](theta), dtype=float)
        a0, rel, mats = self._ext
        t = np.mod(theta - a0, TWO_PI)
        idx = np.clip(np.searchsorted(rel, t, side="right") - 1, 0, rel.size - 2)
        w = ((t - rel[idx]) / (rel[idx + 1] - rel[idx]))[..., None, None]
        out = (1.0 - w) * mats[idx] + w * mats[idx + 1]
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def at(self, z):
        """Matrices at the directions of the nonzero vectors ``z`` of shape ``(..., 2)``."""
        z = np.asarray(z, dtype=float)
        return self(np.arctan2(z[..., 1], z[..., 0]))

    def knots(self):
        """Angles (radians, rotation applied) where the profile may have kinks."""
        if self.mode != "table":
            return np.empty(0)
        return np.mod(self.angles + self.offset, TWO_PI)


def load_profile(path):
    """Read a profile definition file.

    The file is INI-style::

        [profile]
        dimension = 2
        mode = table          ; or isotropic / closed-form
        scale = 1.0           ; isotropic only
        callback = uniaxial   ; closed-form only
        bound = 3.0           ; optional ellipticity constant

        [table]
        0 = 1.5, 0.0, 0.0, 1.2
        10 = ...

    Table keys are angles in degrees, values the row-major matrix entries.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"profile file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ProfileError(f"{path}: {exc}") from exc
    if "profile" not in cp:
        raise ProfileError(f"{path}: missing [profile] section")
    sec = cp["profile"]
    try:
        dim = sec.getint("dimension")
        mode = sec.get("mode", "isotropic").strip()
        bound = sec.getfloat("bound") if "bound" in sec else None
        if dim is None:
            raise ProfileError(f"{path}: key 'dimension' is required")
        if mode == "isotropic":
            prof = AngularProfile.isotropic(dim, sec.getfloat("scale", 1.0))
        elif mode == "closed-form":
            prof = AngularProfile.closed_form(sec.get("callback", ""), bound=bound)
        elif mode == "table":
            if "table" not in cp:
                raise ProfileError(f"{path}: mode=table needs a [table] section")
            rows = [(float(k), [float(v) for v in val.split(",")]) for k, val in cp["table"].items()]
            rows.sort()
            ang = [r[0] for r in rows]
            ent = np.array([r[1] for r in rows])
            if ent.shape[1] != dim * dim:
                raise ProfileError(f"{path}: table rows need {dim * dim} entries, got {ent.shape[1]}")
            prof = AngularProfile.from_table(ang, ent.reshape(-1, dim, dim), bound=bound, degrees=True)
        else:
            raise ProfileError(f"{path}: unknown mode {mode!r}")
    except ValueError as exc:
        if isinstance(exc, ProfileError):
            raise
        raise ProfileError(f"{path}: {exc}") from exc
    if prof.dimension != dim:
        raise ProfileError(f"{path}: dimension {dim} does not match profile ({prof.dimension})")
    return prof


def dump_profile(profile, path):
    """Write ``profile`` in the format read by :func:`load_profile`."""
    cp = configparser.ConfigParser()
    cp["profile"] = {"dimension": str(profile.dimension), "mode": profile.mode, "bound": repr(profile.bound)}
    if profile.offset != 0.0:
        raise ProfileError("rotated profiles cannot be serialised")
    if profile.mode == "isotropic":
        cp["profile"]["scale"] = repr(profile.scale)
    elif profile.mode == "closed-form":
        cp["profile"]["callback"] = profile.callback
    else:
        cp["table"] = {
            repr(float(np.rad2deg(t))): ", ".join(repr(float(v)) for v in m.ravel())
            for t, m in zip(profile.angles, profile.matrices)
        }
    with open(path, "w") as fh:
        cp.write(fh)


# radial layers


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise DomainError("radius must be positive and finite")
    return r


def phi_layer(k, r, dim=2):
    """Radial factor of the dyadic layer ``k`` (``k = -1`` is the far field).

    Parameters
    ----------
    k : int
        Layer index, ``k >= -1``.
    r : float or ndarray
        Positive radii.
    dim : int
        Ambient dimension; the kernel decays like ``r**-(dim+1)``.

    Examples
    --------
    >>> float(phi_layer(0, 0.75))  # doctest: +ELLIPSIS
    1.37037...
    """
    k = int(k)
    if k < -1:
        raise DomainError("layer index must be >= -1")
    r = _check_radius(r)
    p = dim + 1
    if k == -1:
        out = np.where(r < 1.0, 1.0, r ** -float(p))
    else:
        inner = 2.0 ** (-k - 1)
        outer = 2.0 ** (-k)
        base = 2.0 ** (p * k)
        plateau = 2.0 ** (p * (k + 1)) - base
        out = np.where(r <= inner, plateau, np.where(r <= outer, r ** -float(p) - base, 0.0))
    return out if out.ndim else float(out)


def layer_support(k):
    """Radius of the support of layer ``k >= 0``."""
    return 2.0 ** (-int(k))


def layer_kernel(profile, k, z):
    """Matrix ``phi_k(|z|) Ghat(z/|z|)`` for nonzero ``z`` of shape ``(..., 2)``."""
    z = np.asarray(z, dtype=float)
    r = np.hypot(z[..., 0], z[..., 1])
    if np.any(r == 0):
        raise DomainError("layer kernels are not defined at z = 0")
    return np.asarray(phi_layer(k, r))[..., None, None] * profile.at(z)


def truncated_kernel(profile, k_max, z, k_min=0):
    """Partial sum of layers ``k_min..k_max`` at ``z``."""
    z = np.asarray(z, dtype=float)
    r = np.hypot(z[..., 0], z[..., 1])
    if np.any(r == 0):
        raise DomainError("layer kernels are not defined at z = 0")
    rad = sum(np.asarray(phi_layer(k, r)) for k in range(k_min, k_max + 1))
    return np.asarray(rad)[..., None, None] * profile.at(z)


def singular_kernel(profile, z):
    """The full kernel ``|z|**-3 Ghat(z/|z|)``."""
    z = np.asarray(z, dtype=float)
    r = np.hypot(z[..., 0], z[..., 1])
    if np.any(r == 0):
        raise DomainError("the kernel is singular at z = 0")
    return (r ** -3.0)[..., None, None] * profile.at(z)


def angular_rule(profile, panels=32, order=8):
    """Quadrature rule on ``[0, 2pi)`` split at the profile's table knots."""
    if panels < 1 or order < 1:
        raise ConfigurationError("angular quadrature needs at least one panel and one node")
    br = np.linspace(0.0, TWO_PI, int(panels) + 1)
    kn = profile.knots()
    if kn.size:
        br = np.unique(np.concatenate([br, kn]))
    return gauss_panels(br, order)


def layer_l1_norm(profile, k, n_radial=16, angular_panels=32, angular_order=8):
    """``L1`` norm of layer ``k`` with the Frobenius matrix norm.

    Evaluated in polar coordinates: Gauss rules on the plateau disk and the
    tail annulus times an angular rule for ``|Ghat|_F``.
    """
    k = int(k)
    if k < 0:
        raise DomainError("layer_l1_norm needs k >= 0")
    if n_radial < 1:
        raise ConfigurationError("radial quadrature grid is empty (n_radial < 1)")
    b = 2.0 ** (-k - 1)
    rho, w = gauss_panels([0.0, b, 2.0 * b], int(n_radial))
    radial = float(np.dot(w, rho * phi_layer(k, rho)))
    th, wt = angular_rule(profile, angular_panels, angular_order)
    ang = float(np.dot(wt, np.linalg.norm(profile(th), axis=(-2, -1))))
    return radial * ang


def layer_second_moment(k, dim=2):
    """Closed-form ``int_0^inf rho**dim phi_k(rho) d rho``.

    The two polynomial pieces cancel exactly in floating point, leaving
    ``log(2)`` for every ``k >= 0``.
    """
    k = int(k)
    if k < 0:
        raise DomainError("layer_second_moment needs k >= 0")
    p = dim + 1
    a = 2.0 ** (-k)
    b = 0.5 * a
    base = 2.0 ** (p * k)
    plateau = 2.0 ** (p * (k + 1)) - base
    inner = plateau * b**p / p
    tail_poly = base * (a**p - b**p) / p
    return (inner - tail_poly) + math.log(a / b)
