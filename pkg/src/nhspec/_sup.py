"""Grid suprema of |g_k| over a box with local refinement of selected rows."""

import numpy as np
from scipy.optimize import minimize_scalar

# complex entries per evaluation chunk (rows x points)
_BUDGET = 1 << 22


def box_grid(box, per_dim):
    """Tensor grid including the endpoints of every interval, shape (P, d)."""
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _golden(fun, lo, hi, iters=40):
    """Golden-section minimization on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def grid_sup(fun, nrows, box, per_dim):
    """Grid maxima of ``|fun(points, rows)|`` for every row.

    ``fun(points, rows)`` returns shape (len(rows), P).
    """
    grid = box_grid(box, per_dim)
    best = np.full(nrows, -np.inf)
    where = np.zeros((nrows, len(box)))
    row_chunk = max(1, min(nrows, _BUDGET // grid.shape[0]))
    pt_chunk = max(1, _BUDGET // row_chunk)
    for r0 in range(0, nrows, row_chunk):
        rows = np.arange(r0, min(nrows, r0 + row_chunk))
        for p0 in range(0, grid.shape[0], pt_chunk):
            pts = grid[p0:p0 + pt_chunk]
            vals = np.abs(np.asarray(fun(pts, rows)).reshape(rows.size, pts.shape[0]))
            idx = np.argmax(vals, axis=1)
            vmax = vals[np.arange(rows.size), idx]
            upd = vmax > best[rows]
            best[rows[upd]] = vmax[upd]
            where[rows[upd]] = pts[idx[upd]]
    return best, where


def refine_row(fun, k, x0, box, per_dim):
    """Bounded local maximization of ``|fun(x, [k])|`` in the grid cell around ``x0``."""
    d = len(box)
    steps = np.array([(hi - lo) / (per_dim - 1) for lo, hi in box])
    lo = np.maximum(x0 - steps, [b[0] for b in box])
    hi = np.minimum(x0 + steps, [b[1] for b in box])
    rows = np.array([k])

    def val(pt):
        return float(np.abs(np.asarray(fun(pt[None, :], rows)).reshape(-1)[0]))

    x = np.array(x0, dtype=float)
    if d == 1:
        res = minimize_scalar(lambda t: -val(np.array([t])), bounds=(lo[0], hi[0]),
                              method="bounded", options={"xatol": 1e-12})
        x = np.array([res.x])
    else:
        for _ in range(3):
            for j in range(d):
                def along(t, j=j):
                    y = x.copy()
                    y[j] = t
                    return -val(y)
                x[j], _ = _golden(along, lo[j], hi[j])
    return val(x), x


def sup_abs(fun, nrows, box, per_dim=256, refine=True):
    """Estimate ``sup_x |fun(x)[k]|`` for every row k.

    Parameters
    ----------
    fun : callable
        ``fun(points, rows)`` returns shape (len(rows), P) for points (P, d)
        and an integer row selection.
    nrows : int
    box : sequence of (lo, hi)
    per_dim : int
        Grid points per dimension, endpoints included.
    refine : bool or array of int
        Refine all rows (True), none (False), or only the listed rows.

    Returns
    -------
    sups, argmax : ndarrays of shape (K,) and (K, d)
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    best, where = grid_sup(fun, nrows, box, per_dim)
    if refine is False:
        return best, where
    rows = range(nrows) if refine is True else refine
    for k in rows:
        v, x = refine_row(fun, k, where[k], box, per_dim)
        if v > best[k]:
            best[k], where[k] = v, x
    return best, where
