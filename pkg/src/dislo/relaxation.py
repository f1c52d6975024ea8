"""Upper bounds for the relaxed line tension.

Two constructions are searched. A flat interface may split its jump into a
chain of smaller integer jumps (shortest path on the integer lattice). A
zigzag interface alternates two orientations whose average is the
macroscopic one, each leg carrying its own optimal chain.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .line_tension import unit_normal

TOL = 1e-9


def _edge_cost(G, d):
    d = np.asarray(d, dtype=float)
    return float(d @ G @ d)


@dataclass(frozen=True)
class JumpChain:
    """Ordered integer jumps of a flat interface with normal ``nu``."""

    nu: tuple
    steps: tuple

    @property
    def total(self):
        if not self.steps:
            return ()
        return tuple(int(v) for v in np.sum(self.steps, axis=0))

    def cost(self, provider):
        G = provider.matrix(np.asarray(self.nu))
        return math.fsum(_edge_cost(G, d) for d in self.steps)

    def to_dict(self):
        return {"nu": list(self.nu), "steps": [list(d) for d in self.steps]}


@dataclass(frozen=True)
class ZigzagMicrostructure:
    """Two-orientation sawtooth with per-unit-length leg fractions."""

    nu1: tuple
    nu2: tuple
    l1: float
    l2: float
    chain1: JumpChain
    chain2: JumpChain

    def cost(self, provider):
        return self.l1 * self.chain1.cost(provider) + self.l2 * self.chain2.cost(provider)

    def tangent_mismatch(self, nu):
        t = lambda v: np.array([-v[1], v[0]])  # noqa: E731
        return float(np.linalg.norm(self.l1 * t(self.nu1) + self.l2 * t(self.nu2) - t(nu)))

    def to_dict(self):
        return {
            "nu1": list(self.nu1),
            "nu2": list(self.nu2),
            "l1": self.l1,
            "l2": self.l2,
            "chain1": self.chain1.to_dict(),
            "chain2": self.chain2.to_dict(),
        }


@dataclass(frozen=True)
class RelaxationResult:
    value: float
    witness: object
    construction: str
    unrelaxed: float
    degenerate: bool = False

    @property
    def witness_total(self):
        w = self.witness
        return w.total if isinstance(w, (JumpChain, Superposition)) else w.chain1.total

    def to_dict(self):
        return {
            "value": self.value,
            "gamma0": self.unrelaxed,
            "construction": self.construction,
            "degenerate": self.degenerate,
            "witness": self.witness.to_dict(),
        }


def _steps(n, bound):
    rng = range(-bound, bound + 1)
    return [d for d in itertools.product(rng, repeat=n) if any(d)]


def relax_parallel(provider, nu, s, radius=None, step_bound=1):
    """Cheapest chain of integer jumps adding up to ``s`` on a flat interface.

    Dijkstra from ``0`` to ``s`` on the lattice box ``[-R, R]^N`` with edges
    ``d`` (``0 < |d|_inf <= step_bound``) of cost ``d . G(nu) d``. Among
    optimal chains (within ``1e-9``) the one with fewest jumps and then the
    lexicographically smallest sequence is returned.

    Parameters
    ----------
    provider : object
        Supplies ``matrix(nu)`` and ``dimension``.
    nu : array_like
    s : array_like of int
    radius : int, optional
        Box half-width; defaults to ``|s|_inf + 1``.
    step_bound : int

    Returns
    -------
    RelaxationResult
    """
    nu = np.asarray(nu, dtype=float)
    s = tuple(int(v) for v in np.asarray(s).ravel())
    n = provider.dimension
    if len(s) != n:
        raise ConfigurationError(f"jump has {len(s)} components, provider has {n}")
    G = provider.matrix(nu)
    sinf = max((abs(v) for v in s), default=0)
    R = sinf + 1 if radius is None else int(radius)
    if R < sinf:
        raise ConfigurationError(f"box radius {R} < |s|_inf = {sinf}")
    direct = _edge_cost(G, s)
    key_nu = tuple(float(v) for v in nu)
    if not any(s):
        return RelaxationResult(0.0, JumpChain(key_nu, ()), "parallel", 0.0)
    steps = _steps(n, int(step_bound))
    cost = {d: _edge_cost(G, d) for d in steps}
    origin = (0,) * n

    def inside(p):
        return all(-R <= c <= R for c in p)

    dist = {origin: 0.0}
    heap = [(0.0, origin)]
    done = set()
    while heap:
        d0, p = heapq.heappop(heap)
        if p in done:
            continue
        done.add(p)
        for d in steps:
            q = tuple(a + b for a, b in zip(p, d))
            if not inside(q):
                continue
            nd = d0 + cost[d]
            if nd < dist.get(q, math.inf):
                dist[q] = nd
                heapq.heappush(heap, (nd, q))
    if s not in dist:
        raise RuntimeError("target unreachable on the lattice box")
    best = dist[s]

    def tight(p, d):
        q = tuple(a + b for a, b in zip(p, d))
        return q in dist and abs(dist[p] + cost[d] - dist[q]) <= TOL * (1.0 + dist[q]), q

    # hop counts to s along tight edges (backward BFS over reversed steps)
    hops = {s: 0}
    frontier = [s]
    while frontier:
        nxt = []
        for q in frontier:
            for d in steps:
                p = tuple(a - b for a, b in zip(q, d))
                if p in dist and p not in hops and tight(p, d)[0]:
                    hops[p] = hops[q] + 1
                    nxt.append(p)
        frontier = nxt
    chain = []
    p = origin
    while p != s:
        options = []
        for d in steps:
            ok, q = tight(p, d)
            if ok and hops.get(q, math.inf) == hops[p] - 1:
                options.append(d)
        d = min(options)
        chain.append(d)
        p = tuple(a + b for a, b in zip(p, d))
    witness = JumpChain(key_nu, tuple(chain))
    value = witness.cost(provider)
    if abs(value - best) > 1e-9 * (1.0 + best):
        raise RuntimeError("chain replay disagrees with the shortest-path distance")
    return RelaxationResult(value, witness, "parallel", direct)


def _grid_normals(theta, G):
    return [theta + 2.0 * math.pi * j / G for j in range(G)]


def relax_zigzag(provider, nu, s, grid=32, radius=None):
    """Best two-orientation sawtooth from a uniform angular grid.

    The grid ``theta_nu + 2 pi j / G`` contains ``nu`` itself, so the flat
    interface is always feasible and is reported when nothing beats it.
    Leg fractions solve ``l1 nu1 + l2 nu2 = nu`` with ``l1, l2 >= 0``.
    """
    if int(grid) < 8:
        raise ConfigurationError("angular grid needs G >= 8")
    nu = np.asarray(nu, dtype=float)
    theta = math.atan2(nu[1], nu[0])
    flat = relax_parallel(provider, nu, s, radius)
    angles = _grid_normals(theta, int(grid))
    normals = [unit_normal(a) for a in angles]
    normals[0] = nu.copy()
    legs = [flat] + [relax_parallel(provider, v, s, radius) for v in normals[1:]]
    best_val, best_key, best = flat.value, (0, 0, 0), None
    for i, j in itertools.combinations(range(len(normals)), 2):
        A = np.column_stack([normals[i], normals[j]])
        det = np.linalg.det(A)
        if abs(det) < 1e-12:
            continue
        l1, l2 = np.linalg.solve(A, nu)
        if l1 < -1e-15 or l2 < -1e-15:
            continue
        l1, l2 = max(l1, 0.0), max(l2, 0.0)
        val = l1 * legs[i].value + l2 * legs[j].value
        key = (len(legs[i].witness.steps) + len(legs[j].witness.steps), i, j)
        if val < best_val - TOL or (abs(val - best_val) <= TOL and best is not None and key < best_key):
            best_val, best_key = val, key
            best = ZigzagMicrostructure(
                tuple(float(v) for v in normals[i]),
                tuple(float(v) for v in normals[j]),
                float(l1),
                float(l2),
                legs[i].witness,
                legs[j].witness,
            )
    if best is None:
        nz = flat.witness
        deg = ZigzagMicrostructure(nz.nu, nz.nu, 1.0, 0.0, nz, nz)
        return RelaxationResult(flat.value, deg, "zigzag-degenerate", flat.unrelaxed, degenerate=True)
    return RelaxationResult(best.cost(provider), best, "zigzag", flat.unrelaxed)


@dataclass(frozen=True)
class Superposition:
    """Parallel interfaces carrying separate pieces of the jump, each flat or zigzag."""

    pieces: tuple

    @property
    def total(self):
        return tuple(int(v) for v in np.sum([p.witness_total for p in self.pieces], axis=0))

    def cost(self, provider):
        return math.fsum(p.value for p in self.pieces)

    def to_dict(self):
        return {"pieces": [p.to_dict() for p in self.pieces]}


def _box_distances(G, steps, R, n):
    """Dijkstra distances from 0 to every point of ``[-R, R]^n`` with unit steps."""
    cost = [_edge_cost(G, d) for d in steps]
    origin = (0,) * n
    dist = {origin: 0.0}
    heap = [(0.0, origin)]
    done = set()
    while heap:
        d0, p = heapq.heappop(heap)
        if p in done:
            continue
        done.add(p)
        for d, c in zip(steps, cost):
            q = tuple(a + b for a, b in zip(p, d))
            if any(abs(v) > R for v in q):
                continue
            if d0 + c < dist.get(q, math.inf):
                dist[q] = d0 + c
                heapq.heappush(heap, (d0 + c, q))
    return dist


def _piece_costs(provider, nu, R, grid):
    """Best single construction (flat chain or zigzag) for every vector in the box."""
    n = provider.dimension
    steps = _steps(n, 1)
    theta = math.atan2(nu[1], nu[0])
    normals = [unit_normal(a) for a in _grid_normals(theta, int(grid))]
    normals[0] = nu.copy()
    P = [_box_distances(provider.matrix(v), steps, R, n) for v in normals]
    pts = [d for d in _steps(n, R)]
    flat = np.array([P[0][d] for d in pts])
    best = flat.copy()
    for i, j in itertools.combinations(range(len(normals)), 2):
        A = np.column_stack([normals[i], normals[j]])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        l1, l2 = np.linalg.solve(A, nu)
        if l1 < -1e-15 or l2 < -1e-15:
            continue
        l1, l2 = max(l1, 0.0), max(l2, 0.0)
        vals = np.array([l1 * P[i][d] + l2 * P[j][d] for d in pts])
        best = np.minimum(best, vals)
    return dict(zip(pts, best)), dict(zip(pts, flat))


def relax_upper_bound(provider, nu, s, grid=32, radius=None):
    """Best of the flat chain, the zigzag and superpositions of both.

    Every lattice vector ``d`` of the box gets the cost of its cheapest single
    construction; a shortest path over these vectors then splits ``s`` into
    pieces carried by separate interfaces. The result is subadditive in ``s``
    as long as the pieces fit into the box.
    """
    nu = np.asarray(nu, dtype=float)
    par = relax_parallel(provider, nu, s, radius)
    s = tuple(int(v) for v in np.asarray(s).ravel())
    if not any(s):
        return par
    zig = relax_zigzag(provider, nu, s, grid, radius)
    best = zig if zig.construction == "zigzag" and zig.value < par.value - TOL else par
    R = max(abs(v) for v in s) + 1 if radius is None else int(radius)
    g, flat = _piece_costs(provider, nu, R, grid)
    edges = sorted(g)
    n = provider.dimension
    origin = (0,) * n
    dist, prev = {origin: 0.0}, {}
    heap = [(0.0, origin)]
    done = set()
    while heap:
        d0, p = heapq.heappop(heap)
        if p in done:
            continue
        done.add(p)
        for d in edges:
            q = tuple(a + b for a, b in zip(p, d))
            if any(abs(v) > R for v in q):
                continue
            nd = d0 + g[d]
            if nd < dist.get(q, math.inf) - TOL * (1.0 + nd):
                dist[q] = nd
                prev[q] = (p, d)
                heapq.heappush(heap, (nd, q))
    if dist.get(s, math.inf) >= best.value - TOL * (1.0 + best.value):
        return best
    pieces = []
    q = s
    while q != origin:
        q, d = prev[q]
        piece = relax_zigzag(provider, nu, d, grid, R) if g[d] < flat[d] - TOL else relax_parallel(provider, nu, d, R)
        pieces.append(piece)
    pieces.sort(key=lambda r: r.witness_total)
    value = math.fsum(p.value for p in pieces)
    if abs(value - dist[s]) > 1e-9 * (1.0 + value):
        raise RuntimeError("superposition replay disagrees with the shortest-path distance")
    return RelaxationResult(value, Superposition(tuple(pieces)), "superposition", par.unrelaxed)


# necessary conditions


@dataclass
class EllipticityReport:
    checks: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def kinds(self):
        return sorted({v["kind"] for v in self.violations})

    def to_dict(self):
        return {"checks": self.checks, "violations": self.violations}


def unrelaxed_density(provider):
    def value(nu, s):
        s = np.asarray(s, dtype=float)
        return float(s @ provider.matrix(np.asarray(nu, dtype=float)) @ s)

    return value


def relaxed_density(provider, grid=32, radius=None):
    def value(nu, s):
        return relax_upper_bound(provider, nu, s, grid, radius).value

    return value


def bv_ellipticity_report(value, normals, jumps, tol=1e-9):
    """Check jump subadditivity and convexity of the one-homogeneous extension.

    Parameters
    ----------
    value : callable
        ``value(nu, s)`` for unit ``nu``.
    normals : sequence of 2-vectors
    jumps : sequence of integer vectors
    """
    rep = EllipticityReport()
    normals = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in normals]
    jumps = [np.asarray(s, dtype=int) for s in jumps]
    for nu in normals:
        for a, b in itertools.combinations_with_replacement(range(len(jumps)), 2):
            s, t = jumps[a], jumps[b]
            lhs = value(nu, s + t)
            rhs = value(nu, s) + value(nu, t)
            rep.checks += 1
            if lhs > rhs + tol:
                rep.violations.append(
                    {"kind": "subadditivity", "nu": nu.tolist(), "s": s.tolist(), "t": t.tolist(), "lhs": lhs, "rhs": rhs}
                )
    for s in jumps:
        if not s.any():
            continue
        for p, q in itertools.combinations(normals, 2):
            m = 0.5 * (p + q)
            nm = np.linalg.norm(m)
            if nm < 1e-12:
                continue
            lhs = nm * value(m / nm, s)
            rhs = 0.5 * (value(p, s) + value(q, s))
            rep.checks += 1
            if lhs > rhs + tol:
                rep.violations.append(
                    {"kind": "convexity", "p": p.tolist(), "q": q.tolist(), "s": s.tolist(), "lhs": lhs, "rhs": rhs}
                )
    return rep
