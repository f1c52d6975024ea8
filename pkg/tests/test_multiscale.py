import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dislo.energy import SlipField
from dislo.errors import ConfigurationError, DirectionUndefinedError, DomainError
from dislo.kernels import phi_layer
from dislo.multiscale.cascade import mollify_cascade, total_variation
from dislo.multiscale.clustering import (
    JumpSet1D,
    cluster_1d,
    clusters,
    good_levels,
    is_isolated,
    l1_distance,
)
from dislo.multiscale.detect import gradient_field, one_dim_detect, sqrt_scaling_constant
from dislo.multiscale.mollifier import MollifierSpec
from dislo.multiscale.onedim import isolated_jump_energy, layer_energy_1d
from dislo.multiscale.projection import admissible_levels, bv_project, jump_variation, tile_constant
from dislo.multiscale.snapping import counterexample_profile, primitive, snap_one_dimensional

LN2 = math.log(2.0)


# clustering


def test_singleton_never_critical():
    J = JumpSet1D((0.5,), 0, (0.0, 1.0))
    levels = cluster_1d(J, 12)
    assert not any(lv.critical for lv in levels)
    assert all(lv.jumps.points == (0.5,) for lv in levels)


def test_close_pair_has_one_critical_level():
    J = JumpSet1D((0.5, 0.5 + 2.0**-6), 0, (0.0, 1.0))
    levels = cluster_1d(J, 10)
    crit = [lv.h for lv in levels if lv.critical]
    assert crit == [5]
    by_h = {lv.h: lv for lv in levels}
    assert len(by_h[6].jumps) == 2 and len(by_h[5].jumps) == 0
    assert by_h[5].drift == pytest.approx(2.0**-6, abs=1e-15)


def test_odd_cluster_keeps_leftmost():
    assert clusters([0.0, 0.1, 0.15, 0.5], 0.2) == [[0.0, 0.1, 0.15], [0.5]]
    J = JumpSet1D((0.1, 0.11, 0.12, 0.6), 1, (0.0, 1.0))
    lv = cluster_1d(J, 4, h_min=4)[0]
    assert lv.jumps.points == (0.1, 0.6)
    # unchanged outside the cluster hull
    x = np.array([0.05, 0.13, 0.5, 0.9])
    assert np.array_equal(lv.jumps.value(x), J.value(x))


def test_jumpset_validation():
    with pytest.raises(ValueError):
        JumpSet1D((0.5, 0.2))
    with pytest.raises(ValueError):
        JumpSet1D((2.0,))
    with pytest.raises(ValueError):
        JumpSet1D((0.1,), left_value=2)


def test_l1_distance_exact():
    a = JumpSet1D((0.0, 0.5), 0, (-1.0, 1.0))
    b = JumpSet1D((0.25,), 0, (-1.0, 1.0))
    # they differ on (0, 0.25) and (0.5, 1)
    assert l1_distance(a, b) == 0.75


def _random_jumps(rng):
    n = int(rng.integers(1, 13))
    pts = np.unique(rng.uniform(-0.99, 0.99, size=n))
    if rng.random() < 0.5:
        # some tight clusters
        c = rng.uniform(-0.9, 0.9)
        pts = np.unique(np.concatenate([pts, c + rng.uniform(0, 2.0**-8, size=3)]))
    return JumpSet1D(tuple(pts), int(rng.integers(0, 2)), (-1.0, 1.0))


def test_clustering_random_sets():
    rng = np.random.default_rng(11)
    m = 3
    for _ in range(1000):
        J = _random_jumps(rng)
        k = int(rng.integers(4, 13))
        levels = cluster_1d(J, k)
        n_crit = sum(lv.critical for lv in levels)
        assert n_crit <= len(J)
        for lv in levels:
            assert lv.drift <= len(J) * 2.0**-lv.h
            assert is_isolated(lv.jumps.points, lv.h)
        assert len(good_levels(levels, m, k)) >= k - m * len(J)


@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=8, unique=True), st.integers(1, 10))
def test_clustering_parity(pts, k):
    J = JumpSet1D(tuple(sorted(pts)), 0, (-1.0, 1.0))
    for lv in cluster_1d(J, k):
        # parity of the jump count fixes the value at the right end
        assert len(lv.jumps) % 2 == len(J) % 2


# one-dimensional layer energy


def _pair_oracle(h):
    R = 2.0**-h

    # int_{-R}^0 int_0^R phi(y - x) dy dx with the overlap length of the difference variable
    def f(tau):
        return float(phi_layer(h, tau, dim=1)) * min(tau, 2.0 * R - tau)

    val, _ = integrate.quad(f, 0.0, 2.0 * R, points=[0.5 * R, R], epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * val


@pytest.mark.parametrize("h", [0, 3])
def test_isolated_jump_oracle(h):
    assert isolated_jump_energy(h).value == pytest.approx(_pair_oracle(h), rel=1e-8)


@pytest.mark.parametrize("h", range(6))
def test_isolated_jump_scale_invariant(h):
    res = isolated_jump_energy(h, (0.3,))
    assert res.value == pytest.approx(2.0 * LN2, abs=1e-4)
    assert res.flags == []


def test_isolated_jump_flags_and_zero():
    assert isolated_jump_energy(2, ()).value == 0.0
    res = isolated_jump_energy(2, (0.0, 0.1), window=(-1.0, 1.0))
    assert any("closer" in f for f in res.flags)
    res = isolated_jump_energy(1, (0.0,), window=(-0.1, 1.0))
    assert res.flags


def test_separated_jumps_add():
    val = layer_energy_1d(2, (-0.5, 0.5), window=(-1.0, 1.0))
    assert val == pytest.approx(4.0 * LN2, rel=1e-8)


# mollifier


@pytest.mark.parametrize("blend", [0.02, 0.05, 0.1, 0.125])
def test_mollifier_constraints(blend):
    mol = MollifierSpec(blend)
    assert mol.integral() == pytest.approx(1.0, abs=1e-10)
    r, _ = np.polynomial.legendre.leggauss(32)
    r = 0.25 * (r + 1.0)
    assert np.all(mol(r) >= 1.0)
    rr = np.linspace(0, 1.2, 400)
    assert np.all(mol(rr) >= 0.0) and np.all(mol(rr[rr > mol.radius]) == 0.0)


def test_mollifier_stencil_and_profile():
    mol = MollifierSpec()
    K = mol.stencil(0.25, 1.0 / 64)
    assert K.shape[0] % 2 == 1 and np.allclose(K, K.T) and np.allclose(K, K[::-1])
    assert K.sum() / 64**2 == pytest.approx(1.0, abs=1e-12)
    t = np.linspace(-0.7, 0.7, 141)
    lam = mol.half_plane_profile(t)
    assert np.all(np.diff(lam) >= -1e-12)
    assert mol.half_plane_profile(0.0) == pytest.approx(0.5, abs=1e-9)
    assert lam[0] == 0.0 and lam[-1] == 1.0
    with pytest.raises(ConfigurationError):
        MollifierSpec(0.0)
    with pytest.raises(ConfigurationError):
        MollifierSpec(0.2)
    with pytest.raises(ConfigurationError):
        mol.stencil(1e-3, 1e-2)


# cascade


def _blocks(seed, n=128, b=8, N=1):
    rng = np.random.default_rng(seed)
    v = rng.integers(-1, 2, size=(n // b, n // b, N)).astype(float)
    return SlipField(np.kron(v, np.ones((b, b, 1))), 1.0 / n)


def test_total_variation_of_step():
    u = np.zeros((16, 16, 2))
    u[8:] = [1.0, 1.0]
    # one interface of length 1 with jump sqrt(2)
    assert total_variation(u, 1.0 / 16) == pytest.approx(math.sqrt(2.0) * 15 / 16)


def test_cascade_constant_field():
    f = SlipField(np.full((64, 64, 1), 3.0), 1.0 / 64)
    c = mollify_cascade(f, k=4, m=3)
    assert all(abs(d) <= 1e-12 for d in c.defects.values())
    assert c.good_levels() == sorted(c.defects)


def test_cascade_telescoping_and_csv():
    c = mollify_cascade(_blocks(3), k=5, m=3)
    assert abs(c.telescoping_gap()) <= 1e-12
    assert min(c.defects.values()) >= -1e-9
    lines = c.to_csv().splitlines()
    assert lines[0] == "h,tv,defect,local_defect,good_tv,good_energy,good"
    assert len(lines) == len(c.levels) + 1


def test_cascade_mass_preserving():
    n = 128
    x = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    bump = np.where((np.abs(X - 0.5) < 0.1) & (np.abs(Y - 0.5) < 0.1), 1.0, 0.0)
    f = SlipField(bump[..., None], 1.0 / n)
    c = mollify_cascade(f, k=5, m=3, h_min=2)
    for h in range(2, 5):
        assert c.fields[h][c.masks[h]].sum() == pytest.approx(c.fields[h + 3].sum(), abs=1e-10)


def test_cascade_straight_interface():
    n = 128
    u = np.zeros((n, n, 1))
    u[n // 2 :] = 1.0
    c = mollify_cascade(SlipField(u, 1.0 / n), k=5, m=3)
    resolved = 0
    for h, d in c.local_defects.items():
        xs = np.flatnonzero(c.masks[h].any(axis=1))
        # the whole transition layer of width 2 * 0.6 * 2^-h must lie in the domain
        half = int(np.ceil(0.6 * 2.0**-h * n))
        if xs.min() <= n // 2 - half and xs.max() >= n // 2 + half:
            assert abs(d) <= 1e-9
            resolved += 1
    assert resolved >= 3
    assert all(c.good_tv.values())


def test_cascade_drift_constant():
    def consts(seeds):
        out = []
        for s in seeds:
            c = mollify_cascade(_blocks(s, b=8 + 4 * (s % 3)), k=5, m=3)
            out += [c.drift[h] / (2.0**-h * c.tv[h + 3]) for h in c.drift]
        return out

    C = max(consts(range(3)))
    assert 0.0 < C < 1.0
    assert max(consts(range(10, 20))) <= 2.0 * C


def test_cascade_truncation_and_errors():
    c = mollify_cascade(_blocks(1, n=64), k=5, m=3)
    assert c.truncated
    with pytest.raises(ConfigurationError):
        mollify_cascade(_blocks(1), k=5, m=2)
    with pytest.raises(ConfigurationError):
        mollify_cascade(_blocks(1, n=16), k=6, m=3)


def test_cascade_energy_filter(iso1):
    c = mollify_cascade(_blocks(2, n=64), k=4, m=3, profile=iso1)
    assert set(c.good_energy) == set(c.defects)
    assert all(c.good(h) == (c.good_tv[h] and c.good_energy[h]) for h in c.defects)


# detection

H = 1.0 / 256
_x = (np.arange(256) + 0.5) * H
X, Y = np.meshgrid(_x, _x, indexing="ij")


def test_detect_exactly_scalar():
    nu = np.array([0.6, 0.0, -0.8, 0.0])
    f = np.broadcast_to(2.0 * nu, (256, 256, 4)).copy()
    rep = one_dim_detect(f, H, 0.5, center=(0.5, 0.5))
    assert rep.eta <= 1e-12 and rep.residual2 <= 1e-12 and rep.residual1 <= 1e-12
    assert np.allclose(rep.direction, nu)


def test_detect_ramp_gradient():
    u = np.tanh(8.0 * (X - 0.5))[..., None]
    f = gradient_field(u, H)
    rep = one_dim_detect(f, H, 0.5, center=(0.5, 0.5))
    assert rep.residual1 <= 1e-12 and rep.residual2 <= 1e-12
    assert np.allclose(rep.direction, [1.0, 0.0])


def _checker(period, amp, ang):
    c = np.sign(np.sin(2 * np.pi * X / period)) * np.sign(np.sin(2 * np.pi * Y / period))
    n2 = np.array([math.cos(ang), math.sin(ang)])
    return np.where((c > 0)[..., None], np.array([1.0, 0.0]), amp * n2)


def _rotating(beta, period):
    th = beta * np.sin(2 * np.pi * X / period)
    g = 1.0 + 0.5 * np.cos(2 * np.pi * Y / period)
    return np.stack([np.cos(th), np.sin(th)], -1) * g[..., None]


def _random_pair(seed, p):
    rng = np.random.default_rng(seed)
    c = np.kron(rng.random((64, 64)) < p, np.ones((4, 4))) > 0
    return np.where(c[..., None], np.array([0.0, 1.0]), np.array([1.0, 0.3]))


def test_detect_pigeonhole_and_sqrt_scaling():
    cal = [_checker(p, a, t) for p in (1 / 16, 1 / 32) for a in (0.5, 1.0) for t in (0.2, 0.5, 1.0)]
    val = [_rotating(b, p) for b in (0.05, 0.2, 0.5) for p in (1 / 16, 1 / 32)]
    val += [_random_pair(s, p) for s, p in ((1, 0.1), (2, 0.3), (3, 0.5))]

    def const(fs):
        out = []
        for f in fs:
            rep = one_dim_detect(f, H, 0.5, center=(0.5, 0.5))
            assert rep.residual1 <= 16.0 * rep.eta + 1e-12
            out.append(sqrt_scaling_constant(rep))
        return max(out)

    C = const(cal)
    Cv = const(val)
    assert 0.5 * C <= Cv <= 2.0 * C


def test_detect_errors():
    with pytest.raises(DirectionUndefinedError):
        one_dim_detect(np.zeros((256, 256, 2)), H, 0.5, center=(0.5, 0.5))
    with pytest.raises(ConfigurationError):
        one_dim_detect(np.ones((256, 256, 2)), H, 0.5, center=(0.05, 0.5))
    with pytest.raises(DomainError):
        one_dim_detect(np.ones((4, 4, 2, 2)), H, 0.5)


def test_detection_report_dict():
    f = np.broadcast_to([1.0, 0.0], (256, 256, 2)).copy()
    d = one_dim_detect(f, H, 0.5, center=(0.5, 0.5)).to_dict()
    assert d["direction"] == [1.0, 0.0] and d["window_area"] == pytest.approx(1 / 64)


# snapping


def test_primitive():
    assert primitive([4, -6]).tolist() == [2, -3]
    assert primitive([0, 5]).tolist() == [0, 1]
    with pytest.raises(DomainError):
        primitive([0, 0])


def test_snap_identity():
    t = (np.arange(300) + 0.5) / 100
    lam = np.where(t < 1, 0, np.where(t < 2, 2, -1))
    u = np.array([1, -2])[None, :] + lam[:, None] * np.array([2, 1])[None, :]
    res = snap_one_dimensional(t, u)
    assert res.l1_error == 0.0 and res.branch == "collinear"
    assert np.array_equal(res.values, u)


def test_snap_constant_is_degenerate():
    res = snap_one_dimensional(np.linspace(0, 1, 11), np.full((11, 2), 0.2))
    assert res.branch == "degenerate" and res.a.tolist() == [0, 0]


@pytest.mark.parametrize("k", [8, 16, 32])
def test_snap_counterexample(k):
    t, u, dt = counterexample_profile(k)
    res = snap_one_dimensional(t, u, dt)
    assert res.dist_l1 == pytest.approx(1.0 / k, rel=1e-12)
    assert res.l1_error >= 0.5


def _near_integer_profile(seed, width):
    rng = np.random.default_rng(seed)
    n = 600
    t = (np.arange(n) + 0.5) / n * 3
    a = rng.integers(-2, 3, size=2)
    while not a.any():
        a = rng.integers(-2, 3, size=2)
    b = rng.integers(-3, 4, size=2)
    lev = np.cumsum(rng.integers(-1, 2, size=4))
    cuts = np.sort(rng.uniform(0.3, 2.7, size=3))
    lam = np.full(n, float(lev[0]))
    for c, l0, l1 in zip(cuts, lev[:-1], lev[1:]):
        lam += (l1 - l0) * np.clip((t - c) / width + 0.5, 0, 1)
    return t, b + lam[:, None] * a + rng.normal(0, 0.05, size=(n, 2))


def test_snap_constant_fit():
    C = max(snap_one_dimensional(*_near_integer_profile(s, 0.05)).ratio for s in range(8))
    assert 1.0 <= C < 3.0
    for s in range(100, 164):
        assert snap_one_dimensional(*_near_integer_profile(s, 0.05)).ratio <= 2.0 * C


def test_snap_errors():
    with pytest.raises(DomainError):
        snap_one_dimensional(np.arange(3.0), np.zeros((4, 2)))
    with pytest.raises(DomainError):
        snap_one_dimensional([0.0, 1.0, 3.0], np.zeros((3, 1)))
    with pytest.raises(DomainError):
        snap_one_dimensional(np.arange(3.0), [[0.0], [5.0], [0.0]], M=1.0)


# projection


def test_admissible_levels():
    assert admissible_levels(2.0**-8, 0.25) == [6, 7]
    assert admissible_levels(2.0**-6, 0.25) == [5]
    assert admissible_levels(0.3, 0.1) == []


def test_jump_variation():
    v = np.zeros((8, 8, 1))
    v[4:] = 2.0
    assert jump_variation(v, 0.125) == pytest.approx(2.0)


def _interface(n=256, angle=0.3):
    h = 0.5 / n
    x = (np.arange(n) + 0.5) * h
    Xg, Yg = np.meshgrid(x, x, indexing="ij")
    d = (Xg - 0.25) * math.cos(angle) + (Yg - 0.25) * math.sin(angle)
    lam = MollifierSpec().half_plane_profile(d / 2.0**-6)
    return SlipField(np.asarray(lam)[..., None], h)


OMEGA = ((0.125, 0.375), (0.125, 0.375))


def test_project_integer_and_tile_constant(iso1):
    f = _interface()
    with pytest.warns(UserWarning, match="dropped"):
        k, v, rep = bv_project(f, iso1, 2.0**-6, 0.25, OMEGA)
    assert k == 5
    assert np.array_equal(v.values, np.round(v.values))
    assert tile_constant(v.values, k, f.spacing, OMEGA)
    assert rep.l1_error < 0.01 and rep.variation == pytest.approx(0.25 * (1 + math.tan(0.3)), rel=0.1)
    assert rep.energy_v > 0 and rep.energy_u > 0
    assert '"k": 5' in rep.to_json()


def test_project_stripes_identity(iso2):
    n = 256
    h = 0.5 / n
    i = np.arange(n)
    # jumps of at most one per component survive the 3x3 tile average
    u = np.zeros((n, n, 2))
    u[..., 0] = ((i // 16) % 2)[:, None]
    u[..., 1] = -((i // 24) % 2)[:, None]
    f = SlipField(u, h)
    with pytest.warns(UserWarning, match="dropped"):
        k, v, _ = bv_project(f, iso2, 2.0**-6, 0.25, OMEGA)
    m = slice(n // 4, 3 * n // 4)
    assert np.array_equal(v.values[m, m], u[m, m])


def test_project_errors(iso1):
    f = _interface(64)
    with pytest.raises(ConfigurationError):
        bv_project(f, iso1, 0.3, 0.1, OMEGA)
    with pytest.raises(DomainError):
        bv_project(f, iso1, 2.0**-6, 0.6, OMEGA)
    with pytest.raises(ConfigurationError):
        # tiles of side 2^-9 are finer than the spacing 2^-7
        bv_project(f, iso1, 2.0**-6, 0.25, OMEGA)
