"""Independent reference implementations used only by the test suite."""

from __future__ import annotations

import heapq
import math

import numpy as np


def dijkstra_grid(phi: np.ndarray, sources, passable=None) -> np.ndarray:
    """8-connected shortest path with step cost length * phi(destination)."""
    h, w = phi.shape
    if passable is None:
        passable = np.ones((h, w), dtype=bool)
    dist = np.full((h, w), np.inf)
    heap = []
    for r, c in sources:
        if dist[r, c] != 0.0:
            dist[r, c] = 0.0
            heap.append((0.0, r, c))
    heapq.heapify(heap)
    while heap:
        d, r, c = heapq.heappop(heap)
        if d > dist[r, c]:
            continue
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or not passable[nr, nc]:
                    continue
                nd = d + math.sqrt(abs(dr) + abs(dc)) * phi[nr, nc]
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    heapq.heappush(heap, (nd, nr, nc))
    return dist


def lstsq_affine(d, xi) -> tuple[float, float]:
    """Least-squares (a, b) through the pseudo-inverse of the design matrix [d, 1]."""
    A = np.column_stack([np.asarray(d, float), np.ones(len(d))])
    a, b = np.linalg.pinv(A) @ np.asarray(xi, float)
    return float(a), float(b)


def dense_propagation(n, edges, weights, anchored, theta_hat, lam=1.0) -> np.ndarray:
    """Dense assembly and direct solve of (lam * D + L) theta = lam * D theta_hat."""
    M = np.zeros((n, n))
    for (i, j), w in zip(edges, weights):
        M[i, i] += w
        M[j, j] += w
        M[i, j] -= w
        M[j, i] -= w
    D = np.diag(lam * np.asarray(anchored, float))
    return np.linalg.solve(M + D, D @ np.asarray(theta_hat, float))


def brute_components(mask_equal: np.ndarray) -> np.ndarray:
    """Label 8-connected components of equal values by flood fill."""
    h, w = mask_equal.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    nxt = 0
    for r0 in range(h):
        for c0 in range(w):
            if labels[r0, c0] >= 0:
                continue
            stack = [(r0, c0)]
            labels[r0, c0] = nxt
            while stack:
                r, c = stack.pop()
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        nr, nc = r + dr, c + dc
                        if 0 <= nr < h and 0 <= nc < w and labels[nr, nc] < 0 and mask_equal[nr, nc] == mask_equal[r, c]:
                            labels[nr, nc] = nxt
                            stack.append((nr, nc))
            nxt += 1
    return labels


def scalar_metrics(pred, gt) -> dict:
    """Per-pixel loop version of the depth metrics."""
    n = len(gt)
    se = ae = ar = sr = 0.0
    hits = [0, 0, 0]
    logs = []
    for p, g in zip(pred, gt):
        e = p - g
        se += e * e
        ae += abs(e)
        ar += abs(e) / g
        sr += e * e / g
        ratio = max(p / g, g / p)
        for i in range(3):
            if ratio < 1.25 ** (i + 1):
                hits[i] += 1
        logs.append(math.log(p) - math.log(g))
    m = sum(logs) / n
    var = sum(x * x for x in logs) / n - m * m
    return {
        "rmse": math.sqrt(se / n),
        "mae": ae / n,
        "absrel": ar / n,
        "sqrel": sr / n,
        "delta1": hits[0] / n,
        "delta2": hits[1] / n,
        "delta3": hits[2] / n,
        "silog": math.sqrt(max(var, 0.0)),
    }


def smooth_field(rng, terms: int = 4, max_freq: float = 2.0):
    """Random affine-plus-sinusoid surface z(u, v) with analytic second derivatives."""
    amp = rng.normal(0.0, 1.0, terms)
    freq = rng.uniform(-max_freq, max_freq, (terms, 2))
    phase = rng.uniform(0.0, 2 * np.pi, terms)
    lin = rng.normal(size=3)

    def z(u, v):
        out = lin[0] + lin[1] * u + lin[2] * v
        for k in range(terms):
            out = out + amp[k] * np.sin(freq[k, 0] * u + freq[k, 1] * v + phase[k])
        return out

    return z


_DR = (-1, -1, -1, 0, 0, 1, 1, 1)
_DC = (-1, 0, 1, -1, 1, -1, 0, 1)


def refine_reference(coarse, coarse_valid, seeds, cost, reach, pred, passes, trace=None):
    """Plain-Python settle-order refinement with a least-squares plane on the correction field.

    ``trace`` (a list) receives (previous, prediction, updated) per pixel update.
    """
    h, w = coarse.shape
    base = coarse.astype(float).copy()
    z = base.copy()
    seed_mask = np.zeros((h, w), dtype=bool)
    for r, c, v in seeds:
        seed_mask[r, c] = True
        if not coarse_valid[r, c]:
            base[r, c] = v
        z[r, c] = v

    def hops(r, c):
        n = 0
        while pred[r, c] >= 0:
            k = pred[r, c]
            r, c = r + _DR[k], c + _DC[k]
            n += 1
        return n

    todo = [
        (cost[r, c], hops(r, c), r * w + c)
        for r in range(h)
        for c in range(w)
        if reach[r, c] and coarse_valid[r, c] and not seed_mask[r, c] and pred[r, c] >= 0
    ]
    todo.sort()
    final = seed_mask.copy()
    for k in range(passes):
        step = 1.0 / (k + 1)
        resid = z - base
        for _, _, idx in todo:
            r, c = divmod(idx, w)
            d = pred[r, c]
            qr, qc = r + _DR[d], c + _DC[d]
            rows, ys = [], []
            for i in (-1, 0, 1):
                for j in (-1, 0, 1):
                    rr, cc = qr + i, qc + j
                    if 0 <= rr < h and 0 <= cc < w and final[rr, cc]:
                        rows.append([1.0, j, i])
                        ys.append(resid[rr, cc])
            A = np.array(rows).reshape(-1, 3)
            if len(ys) < 3 or np.linalg.matrix_rank(A) < 3:
                corr = resid[qr, qc]
            else:
                alpha = np.linalg.lstsq(A, np.array(ys), rcond=None)[0]
                corr = alpha @ [1.0, c - qc, r - qr]
            pred_z = base[r, c] + corr
            new = (1 - step) * z[r, c] + step * pred_z
            if trace is not None:
                trace.append((z[r, c], pred_z, new))
            z[r, c] = new
            resid[r, c] = new - base[r, c]
            final[r, c] = True
    return z
