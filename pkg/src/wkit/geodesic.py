"""Graph approximation of a Riemannian distance on a rectangular grid."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import GeometryError


class GeodesicMetric:
    """Shortest-path distance over the grid with ``3^d - 1`` neighbours per node.

    Each edge weighs ``sqrt(delta^T G delta)`` with ``G`` the average of the
    tensors at its two endpoints. Points are snapped to the nearest grid node;
    rows of the distance matrix are computed on demand and cached.
    """

    def __init__(self, axes, tensor):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        for a in self.axes:
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError("each axis must be a strictly increasing 1D array")
        self.shape = tuple(a.size for a in self.axes)
        self.d = len(self.axes)
        grids = np.meshgrid(*self.axes, indexing="ij")
        self.nodes = np.stack([g.ravel() for g in grids], axis=1)
        G = _tensor_values(tensor, self.nodes, self.d)
        _check_spd(G, self.nodes)
        self.graph = self._build(G)
        self._rows = {}

    def _build(self, G):
        idx = np.arange(len(self.nodes)).reshape(self.shape)
        rows, cols, wts = [], [], []
        for off in itertools.product((-1, 0, 1), repeat=self.d):
            if off <= (0,) * self.d:
                continue  # each undirected edge once
            src = tuple(slice(max(0, -o), n - max(0, o)) for o, n in zip(off, self.shape))
            dst = tuple(slice(max(0, o), n - max(0, -o) if o < 0 else n) for o, n in zip(off, self.shape))
            i = idx[src].ravel()
            j = idx[dst].ravel()
            delta = self.nodes[j] - self.nodes[i]
            Gm = 0.5 * (G[i] + G[j])
            w = np.sqrt(np.einsum("pi,pij,pj->p", delta, Gm, delta))
            rows += [i, j]
            cols += [j, i]
            wts += [w, w]
        n = len(self.nodes)
        return coo_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()

    def node_index(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        flat = np.zeros(len(pts), dtype=np.int64)
        for k, a in enumerate(self.axes):
            j = np.clip(np.searchsorted(a, pts[:, k]), 1, a.size - 1)
            j = np.where(np.abs(pts[:, k] - a[j - 1]) <= np.abs(pts[:, k] - a[j]), j - 1, j)
            flat = flat * a.size + j
        return flat

    def row(self, i):
        i = int(i)
        if i not in self._rows:
            self._rows[i] = dijkstra(self.graph, indices=i)
        return self._rows[i]

    def __call__(self, a, b):
        ia = self.node_index(a)
        ib = self.node_index(b)
        ia, ib = np.broadcast_arrays(ia, ib)
        out = np.empty(ia.shape)
        for k, (i, j) in enumerate(zip(ia, ib)):
            # use the smaller index as the source so d(x,y) and d(y,x) share a row
            s, t = (i, j) if i <= j else (j, i)
            out[k] = 0.0 if s == t else self.row(s)[t]
        return out


def _tensor_values(tensor, nodes, d):
    if callable(tensor):
        G = np.asarray(tensor(nodes), dtype=float)
    else:
        G = np.asarray(tensor, dtype=float)
    if G.ndim == 0:
        G = np.broadcast_to(G * np.eye(d), (len(nodes), d, d))
    elif G.ndim == 2:
        G = np.broadcast_to(G, (len(nodes), d, d))
    if G.shape != (len(nodes), d, d):
        raise ValueError(f"tensor must give shape ({len(nodes)}, {d}, {d}); got {G.shape}")
    return np.ascontiguousarray(G)


def _check_spd(G, nodes):
    asym = np.abs(G - np.swapaxes(G, 1, 2)).max(axis=(1, 2))
    scale = np.maximum(np.abs(G).max(axis=(1, 2)), 1e-300)
    bad = np.nonzero(asym > 1e-12 * scale)[0]
    if bad.size:
        k = int(bad[0])
        raise GeometryError(f"metric tensor is not symmetric at node {nodes[k].tolist()}",
                            node=nodes[k].tolist())
    lam = np.linalg.eigvalsh(G).min(axis=1)
    bad = np.nonzero(~(lam > 0))[0]
    if bad.size:
        k = int(bad[0])
        raise GeometryError(f"metric tensor is not positive definite at node {nodes[k].tolist()}",
                            node=nodes[k].tolist())


def graph_geodesic_metric(axes, tensor) -> GeodesicMetric:
    """Metric oracle ``(a, b) -> distance`` approximating the Riemannian distance."""
    return GeodesicMetric(axes, tensor)
