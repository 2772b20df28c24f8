"""Pixel-wise refinement of coarse metric depth.

The discontinuity potential phi = sqrt(z_uu^2 + z_vv^2) weights an 8-connected
geodesic distance from the seed pixels. Pixels are then revisited in settle
order (increasing geodesic cost) and pulled towards a prediction made from the
already-settled neighbourhood of their predecessor, blended with the harmonic
step 1/(k+1) over ``dp_order`` passes.

The local model is fitted to the correction field r = z - z_coarse, so the
prediction for pixel p from predecessor q is z_coarse(p) + alpha(q)^T Psi(p - q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .config import PipelineConfig
from .errors import InputError
from .grid import ScalarGrid, SeedSet, second_differences

# 8-neighbourhood offsets; index is the stored predecessor direction
DR = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
DC = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)
STEP = np.sqrt(np.abs(DR) + np.abs(DC)).astype(np.float64)
NO_PRED = -1


@dataclass
class GeodesicField:
    cost: ScalarGrid  # valid where reachable
    predecessor: np.ndarray  # (H, W) int8 direction index into DR/DC, -1 at sources/unreached
    sweeps: int

    @property
    def reachable(self) -> np.ndarray:
        return self.cost.valid


def potential(z: ScalarGrid) -> ScalarGrid:
    """phi = sqrt(z_uu^2 + z_vv^2); pixels next to holes get the largest finite phi."""
    zuu, zvv = second_differences(z)
    ok = zuu.valid & zvv.valid
    phi = np.sqrt(zuu.values ** 2 + zvv.values ** 2)
    wall = float(phi[ok].max()) if ok.any() else 0.0
    phi = np.where(ok, phi, wall)
    return ScalarGrid(np.where(z.valid, phi, 0.0), z.valid.copy())


@numba.njit(cache=True)
def _sweep(cost, pred, phi, ok, forward):
    h, w = cost.shape
    change = 0.0
    if forward:
        nb = (0, 1, 2, 3)
    else:
        nb = (4, 5, 6, 7)
    for t in range(h * w):
        idx = t if forward else h * w - 1 - t
        r = idx // w
        c = idx - r * w
        if not ok[r, c]:
            continue
        best = cost[r, c]
        arg = -2
        for k in nb:
            rr = r + DR[k]
            cc = c + DC[k]
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                continue
            cq = cost[rr, cc]
            if cq == np.inf:
                continue
            cand = cq + STEP[k] * phi[r, c]
            if cand < best:
                best = cand
                arg = k
        if arg != -2:
            old = cost[r, c]
            d = np.inf if old == np.inf else old - best
            if d > change:
                change = d
            cost[r, c] = best
            pred[r, c] = arg
    return change


@numba.njit(cache=True)
def _geodesic(phi, ok, src_r, src_c, group, max_rounds):
    h, w = phi.shape
    cost = np.full((h, w), np.inf)
    pred = np.full((h, w), -1, dtype=np.int8)
    for i in range(len(src_r)):
        cost[src_r[i], src_c[i]] = 0.0
    # sources are fixed at zero cost
    passable = ok.copy()
    for i in range(len(src_r)):
        passable[src_r[i], src_c[i]] = False
    pairs = 0
    for _ in range(max_rounds):
        change = 0.0
        for _ in range(group):
            change = max(change, _sweep(cost, pred, phi, passable, True))
            change = max(change, _sweep(cost, pred, phi, passable, False))
            pairs += 1
        if change <= 1e-12:
            break
    return cost, pred, pairs


def geodesic_dp(phi: ScalarGrid, sources, sweeps: int = 1, max_rounds: int | None = None) -> GeodesicField:
    """Geodesic cost from ``sources`` with step cost length * phi(destination).

    Forward (causal half-neighbourhood) and backward raster sweeps alternate in
    groups of ``sweeps`` pairs until no cost drops by more than 1e-12. Invalid
    phi pixels are impassable.
    """
    if isinstance(sources, SeedSet):
        rows, cols = sources.rows, sources.cols
    else:
        src = np.asarray(sources, dtype=np.int64).reshape(-1, 2)
        rows, cols = src[:, 0], src[:, 1]
    if len(rows) == 0:
        raise InputError("geodesic needs at least one source pixel")
    h, w = phi.shape
    if np.any((rows < 0) | (rows >= h) | (cols < 0) | (cols >= w)):
        raise InputError("source pixel outside the grid")
    if max_rounds is None:
        max_rounds = h * w + 1
    vals = np.where(phi.valid, phi.values, 0.0)
    if np.any(vals < 0):
        raise InputError("potential must be non-negative")
    cost, pred, pairs = _geodesic(vals, phi.valid, rows, cols, int(sweeps), int(max_rounds))
    reach = np.isfinite(cost)
    return GeodesicField(ScalarGrid(np.where(reach, cost, 0.0), reach), pred, pairs)


@numba.njit(cache=True)
def _hops(pred):
    h, w = pred.shape
    hops = np.full(h * w, -1, dtype=np.int64)
    stack = np.empty(h * w, dtype=np.int64)
    for start in range(h * w):
        if hops[start] >= 0:
            continue
        n = 0
        cur = start
        while hops[cur] < 0:
            r = cur // w
            k = pred[r, cur - r * w]
            if k < 0:
                hops[cur] = 0
                break
            stack[n] = cur
            n += 1
            if n > h * w:
                return hops  # cycle guard; cannot happen for strict relaxations
            cur = (r + DR[k]) * w + (cur - r * w + DC[k])
        base = hops[cur]
        for i in range(n - 1, -1, -1):
            base += 1
            hops[stack[i]] = base
    return hops


def settle_order(geo: GeodesicField) -> np.ndarray:
    """Flat indices of reachable pixels by (cost, hops from source, raster index)."""
    hops = _hops(geo.predecessor)
    reach = np.flatnonzero(geo.cost.valid.ravel())
    cost = geo.cost.values.ravel()[reach]
    order = np.lexsort((reach, hops[reach], cost))
    return reach[order]


@numba.njit(cache=True)
def _bspline3(x):
    ax = abs(x)
    if ax < 1.0:
        return 2.0 / 3.0 - ax * ax + 0.5 * ax ** 3
    if ax < 2.0:
        t = 2.0 - ax
        return t * t * t / 6.0
    return 0.0


@numba.njit(cache=True)
def _plane_correction(resid, final, qr, qc, dr, dc):
    """Least-squares plane [1, du, dv] over settled pixels of the 3x3 window at q."""
    h, w = resid.shape
    n = 0.0
    su = sv = suu = suv = svv = sy = suy = svy = 0.0
    for i in range(-1, 2):
        r = qr + i
        if r < 0 or r >= h:
            continue
        for j in range(-1, 2):
            c = qc + j
            if c < 0 or c >= w or not final[r, c]:
                continue
            y = resid[r, c]
            n += 1.0
            su += j
            sv += i
            suu += j * j
            suv += j * i
            svv += i * i
            sy += y
            suy += j * y
            svy += i * y
    if n < 3.0:
        return resid[qr, qc]
    # Cramer's rule on the symmetric normal equations
    c00 = suu * svv - suv * suv
    c01 = sv * suv - su * svv
    c02 = su * suv - sv * suu
    det = n * c00 + su * c01 + sv * c02
    if abs(det) < 1e-9:
        return resid[qr, qc]
    c11 = n * svv - sv * sv
    c12 = su * sv - n * suv
    c22 = n * suu - su * su
    a0 = (c00 * sy + c01 * suy + c02 * svy) / det
    a1 = (c01 * sy + c11 * suy + c12 * svy) / det
    a2 = (c02 * sy + c12 * suy + c22 * svy) / det
    return a0 + a1 * dc + a2 * dr


@numba.njit(cache=True)
def _bspline_correction(resid, final, qr, qc, dr, dc):
    """Constant r(q) plus 9 tensor cubic B-spline bumps on the 3x3 step domain.

    The bumps take a minimum-norm fit to the deviation from r(q), so a
    constant correction field passes through unchanged.
    """
    h, w = resid.shape
    M = np.zeros((9, 9))
    ys = np.zeros(9)
    base = resid[qr, qc]
    n = 0
    for i in range(-1, 2):
        for j in range(-1, 2):
            r = qr + i
            c = qc + j
            if 0 <= r < h and 0 <= c < w and final[r, c]:
                for a in range(3):
                    for bb in range(3):
                        M[n, a * 3 + bb] = _bspline3(i - (a - 1)) * _bspline3(j - (bb - 1))
                ys[n] = resid[r, c] - base
                n += 1
    if n < 3:
        return base
    alpha = np.linalg.lstsq(M[:n], ys[:n], rcond=1e-12)[0]
    out = base
    for a in range(3):
        for bb in range(3):
            out += alpha[a * 3 + bb] * _bspline3(dr - (a - 1)) * _bspline3(dc - (bb - 1))
    return out


@numba.njit(cache=True)
def _refine(z, coarse, rank, order, pred, passes, basis):
    h, w = z.shape
    resid = z - coarse
    # seeds (rank -1) are settled before everything else; later passes see
    # every pixel settled so far, including those downstream of p
    final = np.zeros((h, w), dtype=np.bool_)
    for r in range(h):
        for c in range(w):
            final[r, c] = rank[r, c] == -1
    for k in range(passes):
        step = 1.0 / (k + 1.0)
        for t in range(len(order)):
            idx = order[t]
            r = idx // w
            c = idx - r * w
            d = pred[r, c]
            qr = r + DR[d]
            qc = c + DC[d]
            if basis == 0:
                corr = _plane_correction(resid, final, qr, qc, r - qr, c - qc)
            else:
                corr = _bspline_correction(resid, final, qr, qc, r - qr, c - qc)
            z_hat = coarse[r, c] + corr
            z[r, c] = (1.0 - step) * z[r, c] + step * z_hat
            resid[r, c] = z[r, c] - coarse[r, c]
            final[r, c] = True
    return z


def refine_depth(z_coarse: ScalarGrid, seeds: SeedSet, geo: GeodesicField, cfg: PipelineConfig) -> ScalarGrid:
    """Propagate seed corrections along the geodesic tree with harmonic blending.

    Seed pixels take their metric values and are never modified; unreachable
    pixels keep the coarse depth.
    """
    h, w = z_coarse.shape
    if geo.cost.shape != (h, w):
        raise InputError("geodesic field and coarse depth differ in shape")
    seeds.check_bounds(h, w)
    coarse = z_coarse.values.copy()
    z = coarse.copy()
    valid = z_coarse.valid.copy()
    z[seeds.rows, seeds.cols] = seeds.values
    valid[seeds.rows, seeds.cols] = True
    # correction at a seed that lands on a hole is measured against itself
    coarse[seeds.rows, seeds.cols] = np.where(
        z_coarse.valid[seeds.rows, seeds.cols], coarse[seeds.rows, seeds.cols], seeds.values
    )

    seed_mask = np.zeros((h, w), dtype=bool)
    seed_mask[seeds.rows, seeds.cols] = True
    order = settle_order(geo)
    flat_valid = z_coarse.valid.ravel()
    order = order[~seed_mask.ravel()[order] & flat_valid[order]]
    # only pixels with a settled predecessor can be updated
    pr = geo.predecessor.ravel()[order]
    order = order[pr >= 0]

    big = np.iinfo(np.int64).max
    rank = np.full(h * w, big, dtype=np.int64)
    rank[order] = np.arange(len(order))
    rank[seed_mask.ravel()] = -1
    basis = 0 if cfg.basis == "polynomial" else 1
    out = _refine(z, coarse, rank.reshape(h, w), order, geo.predecessor, cfg.dp_order, basis)
    return ScalarGrid(np.where(valid, out, 0.0), valid)


# -- remainder identities -------------------------------------------------------

def gradients(z: np.ndarray, h: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference (du, dv) on a grid with spacing ``h``; one-sided at borders."""
    zv, zu = np.gradient(np.asarray(z, dtype=np.float64), h, edge_order=2)
    return zu, zv


def symmetric_remainder(z, zu, zv, p, q, h: float = 1.0) -> float:
    """R(p, q) = z(q) - z(p) - 0.5 (grad z(p) + grad z(q)) . (q - p), pixels as (row, col)."""
    (pr, pc), (qr, qc) = (int(v) for v in p), (int(v) for v in q)
    du = (qc - pc) * h
    dv = (qr - pr) * h
    return float(
        z[qr, qc] - z[pr, pc]
        - 0.5 * ((zu[pr, pc] + zu[qr, qc]) * du + (zv[pr, pc] + zv[qr, qc]) * dv)
    )


def l_path_costs(phi: np.ndarray, p, q, h: float = 1.0) -> tuple[float, float]:
    """Riemann sums of phi over the two axis-parallel L-paths from p to q.

    Each unit move contributes h * phi(destination). Returns
    (horizontal-then-vertical, vertical-then-horizontal).
    """
    (pr, pc), (qr, qc) = (int(v) for v in p), (int(v) for v in q)

    def walk(points):
        total = 0.0
        cur = points[0]
        for nxt in points[1:]:
            r, c = cur
            tr, tc = nxt
            sr = (tr > r) - (tr < r)
            sc = (tc > c) - (tc < c)
            while (r, c) != (tr, tc):
                r += sr
                c += sc
                total += h * phi[r, c]
            cur = nxt
        return total

    return walk([(pr, pc), (pr, qc), (qr, qc)]), walk([(pr, pc), (qr, pc), (qr, qc)])
