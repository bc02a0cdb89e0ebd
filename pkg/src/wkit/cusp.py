"""Sampling-based verifiers for the outward-cusp and no-narrow-fjords conditions.

Both checks are bounded searches over a finite sample. A certificate records
the resolution it was produced at and enough data (witnesses, seeds) to be
replayed; a PASS does not prove the condition for the underlying set.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .domains import SampledClosedSet
from .errors import ConfigurationError, EmptyInputError

CAVEAT = ("sampled verification: the condition was tested on finitely many points, "
          "scales and probes at the recorded resolution; it is evidence, not a proof")


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# -- outward cusps ------------------------------------------------------------

@dataclass
class CuspCertificate:
    compact_set_id: str
    epsilon0: float
    rho: float
    r: float
    resolution: float
    probe_count: int
    seed: int
    witnesses: list = field(default_factory=list)
    caveat: str = CAVEAT
    note: str = ""
    checksum: str = ""

    passed = True

    def payload(self):
        d = asdict(self)
        d.pop("checksum")
        return d

    def seal(self):
        self.checksum = _checksum(self.payload())
        return self

    def as_dict(self):
        return {**self.payload(), "checksum": self.checksum, "verdict": "PASS"}

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        keep = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**keep)


@dataclass
class CuspViolation:
    z: list
    epsilon: float
    candidates_tried: int
    reason: str

    passed = False

    def as_dict(self):
        return {**asdict(self), "verdict": "FAIL"}


def _ball_probes(rng, x, radius, count):
    """Half of the probes on a sphere just inside the radius, half uniform in the ball."""
    d = x.shape[0]
    g = rng.standard_normal((count, d))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    shell = count // 2
    rad = np.empty(count)
    rad[:shell] = radius * (1 - 1e-9)
    rad[shell:] = radius * rng.random(count - shell) ** (1.0 / d)
    return x + rad[:, None] * u


def _probe_ok(dom, z, x, eps, s, rng, probe_count):
    y = _ball_probes(rng, x, s, probe_count)
    if not np.all(dom.membership(y)):
        return False
    return bool(np.all(dom.metric(np.broadcast_to(z, y.shape), y) < eps))


def _witness_rng(seed, iz, ie):
    return np.random.default_rng([int(seed), int(iz), int(ie)])


def check_outward_cusps(dom: SampledClosedSet, K=None, epsilon0=0.5, rho=0.5, r=1.0,
                        eps_grid=None, probe_count=128, seed=0, max_candidates=64):
    """Search a corkscrew point ``x`` for every boundary sample ``z`` and scale ``eps``.

    ``K`` holds boundary points to test; by default all boundary samples.
    Candidates are interior samples ``x`` with ``d(x, z) + rho eps^r <= eps``
    whose nearest boundary sample is at least ``rho eps^r`` away, tried in
    order of distance to ``z``. The ball inclusion is then checked on
    ``probe_count`` seeded probe points.
    """
    if probe_count < 100:
        raise ConfigurationError("probe_count must be >= 100")
    if not (epsilon0 > 0 and rho > 0 and r >= 1):
        raise ConfigurationError("need epsilon0 > 0, rho > 0 and r >= 1")
    if eps_grid is None:
        eps_grid = np.geomspace(epsilon0 / 2, epsilon0 / 8, 3)
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float).ravel())[::-1]
    if eps_grid.size == 0 or np.any(eps_grid <= 0) or np.any(eps_grid >= epsilon0):
        raise ConfigurationError("eps_grid must lie in (0, epsilon0)")
    cert = CuspCertificate(dom.set_id(), float(epsilon0), float(rho), float(r),
                           float(dom.resolution), int(probe_count), int(seed))
    if K is None:
        if not dom.boundary.any():
            cert.note = "boundary is empty; the condition holds vacuously"
            return cert.seal()
        zs = dom.boundary_samples
    else:
        zs = np.atleast_2d(np.asarray(K, dtype=float))
    if zs.size == 0:
        raise EmptyInputError("no boundary samples in K")
    inner = dom.interior_samples
    if len(inner) == 0:
        return CuspViolation(zs[0].tolist(), float(eps_grid[0]), 0, "no interior samples")
    itree = dom.interior_tree
    btree = dom.boundary_tree
    for iz, z in enumerate(zs):
        for ie, eps in enumerate(eps_grid):
            s = rho * eps ** r
            idx = np.asarray(itree.query_ball_point(z, eps), dtype=np.int64)
            if idx.size == 0:
                return CuspViolation(z.tolist(), float(eps), 0, "no interior sample within eps")
            cand = inner[idx]
            dz = dom.metric(np.broadcast_to(z, cand.shape), cand)
            keep = dz + s <= eps
            if btree is not None and keep.any():
                bd, _ = btree.query(cand[keep])
                sub = np.nonzero(keep)[0]
                keep[sub[bd < s * (1 - 1e-12)]] = False
            order = np.nonzero(keep)[0]
            order = order[np.lexsort((idx[order], dz[order]))][:max_candidates]
            found = None
            for k in order:
                if _probe_ok(dom, z, cand[k], eps, s, _witness_rng(seed, iz, ie), probe_count):
                    found = cand[k]
                    break
            if found is None:
                return CuspViolation(z.tolist(), float(eps), int(order.size),
                                     "no admissible corkscrew point among samples")
            cert.witnesses.append({"z": z.tolist(), "eps": float(eps), "x": found.tolist(),
                                   "rng": [int(seed), iz, ie]})
    return cert.seal()


def replay_cusp_certificate(cert: CuspCertificate, dom: SampledClosedSet) -> bool:
    """Re-run the probe verification on the stored witnesses."""
    if cert.checksum != _checksum(cert.payload()):
        return False
    for w in cert.witnesses:
        z = np.asarray(w["z"], dtype=float)
        x = np.asarray(w["x"], dtype=float)
        eps = w["eps"]
        s = cert.rho * eps ** cert.r
        if not float(dom.metric(x, z)[0]) < eps:
            return False
        if not _probe_ok(dom, z, x, eps, s, np.random.default_rng(w["rng"]), cert.probe_count):
            return False
    return True


# -- constant arithmetic ------------------------------------------------------

def normalize_constants(epsilon0, rho, r):
    """Rewrite cusp constants so that ``rho = 1`` and ``r >= 2``.

    Returns ``(eps0', 1, r')`` with ``eps0' = min(eps0, rho, 0.99)`` and the
    smallest integer ``r' >= max(r + 1, 2)`` with ``eps^r' <= rho eps^r`` on
    ``(0, eps0']``.
    """
    if not (epsilon0 > 0 and rho > 0 and r >= 1):
        raise ValueError("need epsilon0 > 0, rho > 0 and r >= 1")
    e0 = min(float(epsilon0), float(rho), 0.99)
    r_new = math.ceil(max(r + 1, 2) - 1e-12)
    # eps^(r'-r) is increasing in eps, so checking eps0' covers the whole range
    while e0 ** (r_new - r) > rho:
        r_new += 1
    return e0, 1.0, r_new


def transfer_cusp_constants(epsilon01, rho1, r1, C, alpha):
    """Cusp constants for a metric bi-Hoelder equivalent to the original one.

    Input constants must be normalized (``rho1 = 1``, ``r1 >= 2``,
    ``epsilon01 < 1``); ``C >= 1`` and ``0 < alpha <= 1`` are the equivalence
    constants. ``r2`` is the smallest integer ``>= r1/alpha^2`` with
    ``rho eps02^r2 <= epsilon01``.
    """
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    if not C >= 1:
        raise ValueError("C must be >= 1")
    if rho1 != 1 or r1 < 2 or not (0 < epsilon01 < 1):
        raise ValueError("constants must be normalized: rho = 1, r >= 2, 0 < eps0 < 1")
    eps02 = min(C * epsilon01 ** alpha, 0.5)
    rho2 = 1.0 / C ** (1 + r1 / alpha ** 2)
    r2 = math.ceil(r1 / alpha ** 2 - 1e-12)
    while rho2 * eps02 ** r2 > epsilon01:
        r2 += 1
    return eps02, rho2, r2


def transfer_certificate(cert: CuspCertificate, C, alpha) -> CuspCertificate:
    """Certificate for the second metric; it carries constants only, no witnesses.

    The stored constants are normalized first (see :func:`normalize_constants`).
    """
    e, rho, r = transfer_cusp_constants(*normalize_constants(cert.epsilon0, cert.rho, cert.r), C, alpha)
    out = CuspCertificate(cert.compact_set_id, e, rho, r, cert.resolution, cert.probe_count,
                          cert.seed, [], cert.caveat,
                          f"transferred from {cert.checksum[:12]} with C={C}, alpha={alpha}")
    return out.seal()


# -- no narrow fjords ---------------------------------------------------------

@dataclass
class FjordCertificate:
    compact_set_id: str
    base: list
    p: int
    D: float
    radius: float
    resolution: float
    seed: int
    pairs: list = field(default_factory=list)
    caveat: str = CAVEAT
    checksum: str = ""

    passed = True

    def payload(self):
        d = asdict(self)
        d.pop("checksum")
        return d

    def seal(self):
        self.checksum = _checksum(self.payload())
        return self

    def as_dict(self):
        return {**self.payload(), "checksum": self.checksum, "verdict": "PASS"}

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)

    @property
    def worst_ratio(self):
        """Smallest ``d(x,y) / l^p`` over the recorded pairs."""
        vals = [q["distance"] / q["length"] ** self.p for q in self.pairs if q["length"] > 0]
        return min(vals) if vals else math.inf


@dataclass
class FjordViolation:
    x: list
    y: list
    distance: float
    best_length: float
    required_max_length: float
    disconnected: bool = False
    components: tuple = ()

    passed = False

    def as_dict(self):
        d = asdict(self)
        d["components"] = list(self.components)
        d["best_length"] = None if math.isinf(self.best_length) else self.best_length
        d["verdict"] = "FAIL"
        return d


def _select_pairs(dom, kpts, kbnd, pair_budget, rng, neighbors):
    n = len(kpts)
    chosen = []
    seen = set()

    def add(i, j):
        key = (min(i, j), max(i, j))
        if i != j and key not in seen:
            seen.add(key)
            chosen.append(key)

    # nearest neighbours of boundary samples expose narrow fjords
    bidx = np.nonzero(kbnd)[0]
    if bidx.size:
        tree = cKDTree(kpts)
        _, nn = tree.query(kpts[bidx], k=min(n, neighbors + 1))
        local = [(int(i), int(j)) for i, row in zip(bidx, np.atleast_2d(nn)) for j in row[1:]]
        local = [local[k] for k in rng.permutation(len(local))]
        for i, j in local[:pair_budget // 2]:
            add(i, j)
    tries = 0
    while len(chosen) < pair_budget and tries < 20 * pair_budget:
        i, j = rng.integers(0, n, size=2)
        add(int(i), int(j))
        tries += 1
    return chosen


def _interior_graph(dom, nodes, radius):
    """Sparse adjacency among interior samples joined by interior segments."""
    pairs = cKDTree(nodes).query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        return pairs.reshape(0, 2), np.zeros(0)
    a, b = nodes[pairs[:, 0]], nodes[pairs[:, 1]]
    w = dom.metric(a, b)
    ok = np.zeros(len(pairs), dtype=bool)
    if dom.boundary_distance is not None:
        ok = dom.boundary_distance(a) > w
    rest = np.nonzero(~ok)[0]
    if rest.size:
        ok[rest] = dom.segment_interior(a[rest], b[rest])
    return pairs[ok], w[ok]


def check_no_narrow_fjords(dom: SampledClosedSet, a, p=1, D=0.1, K=None, radius=0.5,
                           pair_budget=200, seed=0, neighbors=2):
    """Test ``d(x, y) >= D l^p`` for sampled pairs of a neighbourhood ``K`` of ``a``.

    ``l`` is the length of a shortest polygonal path whose inner vertices are
    interior samples and whose segments lie in the interior. By default ``K``
    is the set of samples within ``radius`` of ``a``; the search graph uses
    interior samples within ``3 * radius``.
    """
    if p < 1 or int(p) != p or not D > 0:
        raise ConfigurationError("need an integer p >= 1 and D > 0")
    a = np.asarray(a, dtype=float).reshape(-1)
    h = dom.resolution
    rng = np.random.default_rng(seed)
    if K is None:
        sel = dom.metric(np.broadcast_to(a, dom.samples.shape), dom.samples) <= radius
        kpts, kbnd = dom.samples[sel], dom.boundary[sel]
    else:
        kpts = np.atleast_2d(np.asarray(K, dtype=float))
        kbnd = ~dom.interior(kpts)
    if len(kpts) < 2:
        raise EmptyInputError("K needs at least two samples")
    if not np.all(dom.membership(kpts)):
        raise ConfigurationError("K must lie in the set")
    cert = FjordCertificate(dom.set_id(), a.tolist(), int(p), float(D), float(radius),
                            float(h), int(seed))
    pairs = _select_pairs(dom, kpts, kbnd, pair_budget, rng, neighbors)

    inner = dom.interior_samples
    near = dom.metric(np.broadcast_to(a, inner.shape), inner) <= 3 * radius + 2 * h
    nodes = inner[near]
    step = h * math.sqrt(dom.dimension) * 1.01
    edges, weights = _interior_graph(dom, nodes, step)
    # endpoints become extra nodes attached by interior segments
    ends = sorted({i for pr in pairs for i in pr})
    emap = {e: len(nodes) + k for k, e in enumerate(ends)}
    epts = kpts[ends]
    rows, cols, wts = [edges[:, 0]], [edges[:, 1]], [weights]
    att = cKDTree(nodes).query_ball_point(epts, 2 * step) if len(nodes) else [[] for _ in ends]
    ea = np.array([k for k, lst in enumerate(att) for _ in lst], dtype=np.int64)
    nb = np.array([j for lst in att for j in lst], dtype=np.int64)
    if ea.size:
        ok = dom.segment_interior(epts[ea], nodes[nb])
        rows.append(len(nodes) + ea[ok])
        cols.append(nb[ok])
        wts.append(dom.metric(epts[ea[ok]], nodes[nb[ok]]))
    pi = np.array([emap[i] for i, _ in pairs], dtype=np.int64)
    pj = np.array([emap[j] for _, j in pairs], dtype=np.int64)
    dxy = dom.metric(kpts[[i for i, _ in pairs]], kpts[[j for _, j in pairs]])
    direct = dom.segment_interior(kpts[[i for i, _ in pairs]], kpts[[j for _, j in pairs]])
    rows.append(pi[direct])
    cols.append(pj[direct])
    wts.append(dxy[direct])
    n_all = len(nodes) + len(ends)
    # pairs without a direct segment (e.g. on a flat face) may still bend
    # through a midpoint nudged toward the interior
    mids = []
    for k in np.nonzero(~direct)[0]:
        x, y = kpts[pairs[k][0]], kpts[pairs[k][1]]
        m = 0.5 * (x + y)
        _, c = dom.interior_tree.query(m) if dom.interior_tree is not None else (None, None)
        if c is None:
            continue
        target = dom.interior_samples[c]
        for t in (1e-6, 1e-4, 1e-2, 0.1, 0.5):
            mp = m + t * (target - m)
            if dom.interior(mp[None])[0] and np.all(dom.segment_interior(np.stack([x, y]), np.stack([mp, mp]))):
                v = n_all + len(mids)
                mids.append(mp)
                rows.append(np.array([pi[k], pj[k]]))
                cols.append(np.array([v, v]))
                wts.append(dom.metric(np.stack([x, y]), np.stack([mp, mp])))
                break
    n_all += len(mids)
    mids = np.array(mids).reshape(-1, dom.dimension)
    r_all = np.concatenate(rows)
    c_all = np.concatenate(cols)
    w_all = np.maximum(np.concatenate(wts), 1e-300)
    graph = coo_matrix((np.concatenate([w_all, w_all]),
                        (np.concatenate([r_all, c_all]), np.concatenate([c_all, r_all]))),
                       shape=(n_all, n_all)).tocsr()
    allowed = (dxy / D) ** (1.0 / p) * (1 + 1e-12)
    by_source = {}
    for k, s in enumerate(pi):
        by_source.setdefault(int(s), []).append(k)
    order = sorted(by_source, key=lambda s: max(allowed[k] for k in by_source[s]))
    for s in order:
        ks = by_source[s]
        lim = float(max(allowed[k] for k in ks))
        dist, pred = dijkstra(graph, indices=s, limit=lim, return_predecessors=True)
        for k in ks:
            t = int(pj[k])
            if dist[t] <= allowed[k]:
                cert.pairs.append({"x": kpts[pairs[k][0]].tolist(), "y": kpts[pairs[k][1]].tolist(),
                                   "distance": float(dxy[k]), "length": float(dist[t]),
                                   "path": _path(pred, s, t, np.concatenate([nodes, epts, mids]))})
                continue
            full = dijkstra(graph, indices=s)
            best = float(full[t])
            comps = ()
            if math.isinf(best):
                _, labels = connected_components(graph, directed=False)
                comps = (int(labels[s]), int(labels[t]))
            return FjordViolation(kpts[pairs[k][0]].tolist(), kpts[pairs[k][1]].tolist(),
                                  float(dxy[k]), best, float(allowed[k]), math.isinf(best), comps)
    return cert.seal()


def _path(pred, s, t, coords):
    out = []
    v = t
    while v >= 0:
        out.append(coords[v].tolist())
        if v == s:
            break
        v = int(pred[v])
    return out[::-1]
