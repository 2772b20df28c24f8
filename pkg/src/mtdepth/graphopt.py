"""Segment graph construction and graph-regularized propagation of calibration parameters.

Solves
    min  sum_{i anchored} lam * ||theta_i - theta_hat_i||^2 + sum_{(i,j)} w_ij ||theta_i - theta_j||^2
through its normal equations (lam * D_Q + L_w) theta = lam * D_Q theta_hat, one
system per parameter coordinate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .calibrate import CalibParams, from_proxy
from .config import PipelineConfig
from .errors import NumericalError
from .grid import ScalarGrid
from .segmentation import SegmentMap

log = logging.getLogger(__name__)

_KNN_CHUNK = 256


@dataclass
class SegmentGraph:
    params: list  # CalibParams per node
    centroids: np.ndarray  # (n, 2) or (n, 3)
    edges: np.ndarray  # (m, 2) int, i < j
    weights: np.ndarray  # (m,)
    tau: float

    @property
    def n_nodes(self) -> int:
        return len(self.params)

    def laplacian(self) -> sparse.csr_matrix:
        n = self.n_nodes
        i, j = self.edges[:, 0], self.edges[:, 1]
        w = self.weights
        adj = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return (sparse.diags(deg) - adj).tocsr()


@dataclass
class PropagationResult:
    params: list
    iterations: int = 0
    residual: float = 0.0
    orphan_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def warning(self) -> bool:
        return len(self.orphan_nodes) > 0


def knn_edges(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Union-symmetrized k-nearest-neighbor edges with their Euclidean lengths.

    Ties are broken by node id (stable sort on distance).
    """
    n = len(points)
    k = min(k, n - 1)
    if k <= 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    src, dst = [], []
    for lo in range(0, n, _KNN_CHUNK):
        hi = min(n, lo + _KNN_CHUNK)
        diff = points[lo:hi, None, :] - points[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        dist[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        nbr = np.argsort(dist, axis=1, kind="stable")[:, :k]
        src.append(np.repeat(np.arange(lo, hi), k))
        dst.append(nbr.ravel())
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    pairs = np.unique(np.stack([np.minimum(src, dst), np.maximum(src, dst)], axis=1), axis=0)
    lengths = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    return pairs, lengths


def build_graph(seg: SegmentMap, anchors: list, knn: int, points: np.ndarray | None = None) -> SegmentGraph:
    """kNN graph over segment centroids with w_ij = exp(-|c_i - c_j| / tau).

    tau is the median retained edge length (1 when that median is zero).
    ``points`` overrides the 2D pixel centroids, e.g. with back-projected 3D ones.
    """
    pts = seg.centroids if points is None else np.asarray(points, dtype=np.float64)
    if len(pts) != seg.n_segments or len(anchors) != seg.n_segments:
        raise ValueError("one centroid and one parameter entry per segment required")
    edges, lengths = knn_edges(pts, knn)
    tau = float(np.median(lengths)) if len(lengths) else 1.0
    if not tau > 0:
        tau = 1.0
    return SegmentGraph(list(anchors), pts, edges, np.exp(-lengths / tau), tau)


def segment_points_3d(seg: SegmentMap, depth: ScalarGrid, focal: float = 1.0) -> np.ndarray:
    """Mean back-projected point per segment with principal point at the image centre."""
    h, w = seg.shape
    rr, cc = np.indices((h, w), dtype=np.float64)
    z = np.where(depth.valid, depth.values, np.nan)
    x = (cc - (w - 1) / 2.0) * z / focal
    y = (rr - (h - 1) / 2.0) * z / focal
    flat = seg.labels.ravel()
    out = np.zeros((seg.n_segments, 3))
    for k, comp in enumerate((x, y, z)):
        v = comp.ravel()
        ok = np.isfinite(v)
        s = np.bincount(flat[ok], weights=v[ok], minlength=seg.n_segments)
        cnt = np.bincount(flat[ok], minlength=seg.n_segments)
        out[:, k] = np.where(cnt > 0, s / np.maximum(cnt, 1), 0.0)
    return out


def _pcg(A: sparse.csr_matrix, rhs: np.ndarray, tol: float, maxiter: int, x0: np.ndarray | None = None):
    """Jacobi-preconditioned conjugate gradient for several right-hand sides at once."""
    inv_diag = 1.0 / A.diagonal()
    x = np.zeros_like(rhs) if x0 is None else x0.astype(np.float64, copy=True)
    r = rhs - A @ x
    z = inv_diag[:, None] * r
    p = z.copy()
    rz = np.sum(r * z, axis=0)
    it = 0
    res = np.max(np.abs(r)) if r.size else 0.0
    while res > tol and it < maxiter:
        Ap = A @ p
        denom = np.sum(p * Ap, axis=0)
        alpha = np.divide(rz, denom, out=np.zeros_like(rz), where=denom != 0)
        x += alpha * p
        r -= alpha * Ap
        res = np.max(np.abs(r))
        it += 1
        z = inv_diag[:, None] * r
        rz_new = np.sum(r * z, axis=0)
        beta = np.divide(rz_new, rz, out=np.zeros_like(rz), where=rz != 0)
        p = z + beta * p
        rz = rz_new
    # report the true residual rather than the recursively updated one
    res = float(np.max(np.abs(A @ x - rhs))) if rhs.size else 0.0
    return x, it, res


def propagate(graph: SegmentGraph, anchor_weight: float = 1.0) -> PropagationResult:
    """Solve for every node's (a, b); anchorless components get the mean anchor parameters."""
    n = graph.n_nodes
    anchored = np.array([p.anchored for p in graph.params], dtype=bool)
    if not anchored.any():
        raise NumericalError("propagation needs at least one anchored segment")
    theta_hat = np.array([[p.a, p.b] for p in graph.params], dtype=np.float64)
    theta = np.zeros((n, 2))

    L = graph.laplacian()
    ncomp, comp = connected_components(L, directed=False)
    has_anchor = np.bincount(comp, weights=anchored.astype(float), minlength=ncomp) > 0
    solvable = has_anchor[comp]
    orphans = np.flatnonzero(~solvable)
    if len(orphans):
        log.warning("%d segments unreachable from any anchor; using mean anchor parameters", len(orphans))
        theta[orphans] = theta_hat[anchored].mean(axis=0)

    idx = np.flatnonzero(solvable)
    A = (L[idx][:, idx] + sparse.diags(anchor_weight * anchored[idx].astype(float))).tocsr()
    rhs = anchor_weight * anchored[idx, None] * theta_hat[idx]
    # warm start at each component's anchor mean; exact when a component has one anchor
    cnt = np.bincount(comp, weights=anchored.astype(float), minlength=ncomp)
    x0 = np.stack(
        [np.bincount(comp, weights=anchored * theta_hat[:, k], minlength=ncomp) for k in range(2)], axis=1
    ) / np.maximum(cnt, 1.0)[:, None]
    scale = max(1.0, float(np.max(np.abs(theta_hat[anchored]))))
    tol = 1e-8 * scale
    # iterate well past the acceptance tolerance; only ``tol`` is enforced
    x, it, res = _pcg(A, rhs, 1e-14 * scale, 10 * max(len(idx), 1), x0[comp[idx]])
    if res > tol:
        raise NumericalError(f"conjugate gradient did not converge: residual {res:.3e} > {tol:.3e}")
    theta[idx] = x

    params = [
        CalibParams(float(theta[i, 0]), float(theta[i, 1]), bool(anchored[i])) for i in range(n)
    ]
    return PropagationResult(params, it, res, orphans)


def objective(graph: SegmentGraph, theta: np.ndarray, anchor_weight: float = 1.0) -> float:
    anchored = np.array([p.anchored for p in graph.params], dtype=bool)
    theta_hat = np.array([[p.a, p.b] for p in graph.params])
    fid = anchor_weight * np.sum((theta[anchored] - theta_hat[anchored]) ** 2)
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    smooth = np.sum(graph.weights * np.sum((theta[i] - theta[j]) ** 2, axis=1))
    return float(fid + smooth)


def lift_to_pixels(seg: SegmentMap, params: list, d: ScalarGrid, cfg: PipelineConfig) -> ScalarGrid:
    """Apply each segment's calibration to its pixels and map proxies back to metric depth."""
    if len(params) != seg.n_segments:
        raise ValueError("params must cover every segment")
    a = np.array([p.a for p in params])[seg.labels]
    b = np.array([p.b for p in params])[seg.labels]
    xi = np.maximum(a * d.values + b, cfg.d_min)
    z = np.zeros(d.shape)
    z[d.valid] = from_proxy(xi[d.valid], cfg)
    valid = d.valid & np.isfinite(z)
    return ScalarGrid(np.where(valid, z, 0.0), valid)
