"""Modal solution of ``df/dt + T_sigma f = 0`` and Morse diagnostics of the solution.

The solution is ``f(t) = sum_k f_k exp(-chi_k t) w_k``. For multipliers
``w_k = u_k`` and ``chi_k = sigma(k)``; otherwise ``(chi_k, w_k)`` come from
the eigendecomposition of the N-section of the associated matrix.
"""

import dataclasses
import math

import numpy as np
from scipy import ndimage

from .basis import estimate_riesz_constants, gram_quadrature
from .errors import NumericalFailure, PreconditionError
from .matrix import build_matrix
from .quantize import apply_operator
from .report import csv_text, fmt
from .transform import (GridFunction, SpectralCoefficients, default_quadrature,
                        forward_transform)

__all__ = [
    "Expansion",
    "HeatTrajectory",
    "CriticalPoint",
    "MorseReport",
    "EmergenceResult",
    "heat_solve",
    "residual_check",
    "sobolev_stability",
    "critical_points",
    "morse_report",
    "morse_emergence",
    "twisted_trig_function",
    "twisted_trig_hessian",
    "default_t_grid",
]

COND_LIMIT = 1e8
ENERGY_TOL = 1e-6


def default_t_grid():
    """Geometric grid of 32 times from 1e-3 to 1e2."""
    return np.geomspace(1e-3, 1e2, 32)


# ---------------------------------------------------------------------------
# expansions

@dataclasses.dataclass(frozen=True, eq=False)
class Expansion:
    """``f = sum_xi c_xi u_xi`` with analytic value, gradient and Hessian.

    Complex systems are allowed; ``real`` derivatives take the real part,
    which is exact when the coefficients encode a real function.
    """

    system: object
    indices: tuple
    coeffs: np.ndarray
    basis_cache: dict = dataclasses.field(default=None, compare=False, repr=False)

    @classmethod
    def from_coefficients(cls, fhat):
        if fhat.kind != "L":
            raise PreconditionError("expansions use L-coefficients")
        return cls(fhat.system, fhat.indices, fhat.values)

    def _basis(self, points, deriv):
        # large point sets (seed grids) are shared across expansions of one trajectory
        cache = self.basis_cache
        if cache is None or len(points) < 256:
            return self.system.u(list(self.indices), points, deriv)
        pts = np.ascontiguousarray(points, dtype=float)
        key = (pts.shape, hash(pts.tobytes()), deriv)
        if key not in cache:
            cache[key] = self.system.u(list(self.indices), pts, deriv)
        return cache[key]

    def value(self, points, constant=True):
        """Values at points; ``constant=False`` sums only the non-constant modes."""
        c = self.coeffs if constant else self.coeffs * (1.0 - self.constant_mask)
        return np.tensordot(c, self._basis(points, 0), axes=(0, 0))

    def gradient(self, points):
        return np.tensordot(self.coeffs, self._basis(points, 1), axes=(0, 0))

    def hessian(self, points):
        return np.tensordot(self.coeffs, self._basis(points, 2), axes=(0, 0))

    @property
    def constant_mask(self):
        """1.0 for modes whose gradient vanishes identically (constant eigenfunctions)."""
        cached = self.__dict__.get("_mask")
        if cached is not None:
            return cached
        box = self.system.domain.box
        rng = np.random.default_rng(12345)
        probe = np.array([[lo + (hi - lo) * r for (lo, hi), r in zip(box, row)]
                          for row in rng.random((5, len(box)))])
        g = self._basis(probe, 1)
        mask = np.all(g == 0, axis=(1, 2)).astype(float)
        object.__setattr__(self, "_mask", mask)
        return mask

    def imaginary_ratio(self, points):
        vals = self.value(points)
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        return float(np.max(np.abs(vals.imag))) / scale


# ---------------------------------------------------------------------------
# heat evolution

@dataclasses.dataclass(frozen=True, eq=False)
class HeatTrajectory:
    """Exact modal trajectory.

    Attributes
    ----------
    times : ndarray
        Strictly increasing, starting at 0.
    chi : ndarray
        Modal decay rates.
    modal : ndarray
        Initial modal amplitudes ``f_k``.
    frames : ndarray, shape (len(times), K)
        ``f_k exp(-chi_k t)`` per time.
    W : ndarray or None
        Mode vectors in u-coordinates (columns); None means identity.
    eigen_source : {"multiplier", "section"}
    norms : dict
        ``"L2"`` and ``"H^s"`` entries, one value per time.
    """

    system: object
    symbol: object
    indices: tuple
    times: np.ndarray
    chi: np.ndarray
    modal: np.ndarray
    frames: np.ndarray
    W: np.ndarray
    eigen_source: str
    norms: dict
    gram_uu: np.ndarray
    eigvec_condition: float = 1.0
    truncation_energy_loss: float = 0.0

    def modal_at(self, t):
        return self.modal * np.exp(-self.chi * float(t))

    def u_coefficients(self, t):
        """``f(t)`` as L-coefficients over the truncation."""
        m = self.modal_at(t)
        c = m if self.W is None else self.W @ m
        return SpectralCoefficients(self.indices, c, self.system, "L")

    def expansion(self, t, basis_cache=None):
        return Expansion(self.system, self.indices, self.u_coefficients(t).values, basis_cache)

    def sobolev(self, t, s):
        c = self.u_coefficients(t).values
        return _sobolev_from_u(self.system, self.indices, c, self.gram_uu, s)

    def to_dict(self):
        return {
            "times": self.times,
            "eigen_source": self.eigen_source,
            "truncation": len(self.indices),
            "eigvec_condition": self.eigvec_condition,
            "truncation_energy_loss": self.truncation_energy_loss,
            "chi_min_real": float(np.min(self.chi.real)) if self.chi.size else 0.0,
            "norms": self.norms,
        }

    def frames_csv(self):
        l = self.system.index_dim
        rows = []
        labels = self.indices if self.W is None else [(k,) * l for k in range(len(self.chi))]
        for t, frame in zip(self.times, self.frames):
            for lab, z in zip(labels, frame):
                rows.append([fmt(t)] + list(lab) + [fmt(z.real), fmt(z.imag)])
        return csv_text(["t"] + [f"mode{j + 1}" for j in range(l)] + ["re", "im"], rows)

    def norms_csv(self):
        keys = sorted(k for k in self.norms if k != "L2")
        rows = [[fmt(t), fmt(self.norms["L2"][i])] + [fmt(self.norms[k][i]) for k in keys]
                for i, t in enumerate(self.times)]
        return csv_text(["t", "L2"] + keys, rows)


def _sobolev_from_u(system, indices, c, guu, s):
    star = guu @ c
    w = system.bracket(list(indices)) ** (2.0 * s)
    val = complex(np.sum(w * c * star.conj()))
    return math.sqrt(max(val.real, 0.0))


def _initial_coefficients(system, f0, indices, quad):
    """L-coefficients of f0 over ``indices`` and the relative energy left outside."""
    if isinstance(f0, SpectralCoefficients):
        if f0.kind != "L":
            raise PreconditionError("initial data must be L-coefficients")
        missing = set(f0.indices) - set(indices)
        if missing and np.any(np.abs([f0[k] for k in missing]) > 0):
            raise PreconditionError(f"initial coefficients outside the truncation: {sorted(missing)[:5]}")
        return np.array([f0[k] for k in indices]), 0.0
    if callable(f0) and not isinstance(f0, GridFunction):
        f0 = GridFunction.from_callable(f0, quad)
    fhat = forward_transform(f0, system, indices)
    rule = f0.rule
    recon = fhat.values @ system.u(list(indices), rule.nodes)
    total = float(np.abs(f0.values) ** 2 @ rule.weights)
    loss = float(np.abs(f0.values - recon) ** 2 @ rule.weights) / max(total, 1e-300)
    if loss > ENERGY_TOL:
        raise PreconditionError(
            f"initial data has relative energy {loss:.2e} outside the truncation (limit {ENERGY_TOL:g})")
    return fhat.values, loss


def heat_solve(symbol, f0, times, N=None, quad=None, s_values=(0.0, 1.0, 2.0)):
    """Solve ``df/dt + T_sigma f = 0`` exactly in modes.

    Parameters
    ----------
    symbol : Symbol
    f0 : SpectralCoefficients, GridFunction or callable
    times : sequence of float
        Strictly increasing, first entry 0.
    N : int, optional
        Truncation size; defaults to the coefficient count of ``f0`` or 64.
    """
    system = symbol.system
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise PreconditionError("times must be strictly increasing and start at 0")
    if N is None:
        N = len(f0.indices) if isinstance(f0, SpectralCoefficients) else 64
    indices = tuple(system.enumerate(int(N)))
    if quad is None:
        quad = default_quadrature(system, indices, extra_periods=symbol.x_periods)
    c0, loss = _initial_coefficients(system, f0, indices, quad)
    cond = 1.0
    if symbol.kind == "multiplier":
        chi = symbol.multiplier_values(list(indices)).astype(complex)
        W = None
        modal = c0.astype(complex)
        source = "multiplier"
    else:
        m = build_matrix(symbol, len(indices), quad=quad).entries
        chi, W = np.linalg.eig(m)
        order = np.lexsort((np.round(chi.imag, 10), np.round(chi.real, 10)))
        chi, W = chi[order], W[:, order]
        cond = float(np.linalg.cond(W))
        if not cond < COND_LIMIT:
            raise NumericalFailure(
                f"section eigenvector basis is ill-conditioned (cond {cond:.2e} >= {COND_LIMIT:g})")
        modal = np.linalg.solve(W, c0.astype(complex))
        source = "section"
    frames = modal[None, :] * np.exp(-np.outer(times, chi))
    guu = gram_quadrature(system, list(indices), default_quadrature(system, indices), "uu").T
    norms = {"L2": [], **{f"H^{s:g}": [] for s in s_values}}
    for frame in frames:
        c = frame if W is None else W @ frame
        norms["L2"].append(_sobolev_from_u(system, indices, c, guu, 0.0))
        for s in s_values:
            norms[f"H^{s:g}"].append(_sobolev_from_u(system, indices, c, guu, s))
    return HeatTrajectory(system=system, symbol=symbol, indices=indices, times=times, chi=chi,
                          modal=modal, frames=frames, W=W, eigen_source=source, norms=norms,
                          gram_uu=guu, eigvec_condition=cond, truncation_energy_loss=loss)


def residual_check(traj, symbol=None, t=0.5, dt=1e-5, quad=None):
    """``|| D_dt f(t) + T_sigma f(t) ||_{L^2(dmu)}`` with the central difference D_dt.

    The central difference of each mode, ``(e^{-chi(t+dt)} - e^{-chi(t-dt)}) / (2 dt)``,
    is evaluated as ``-e^{-chi t} sinh(chi dt) / dt`` so that no cancellation
    hides the O(dt^2) term. ``T_sigma f(t)`` comes from :func:`apply_operator`.
    """
    symbol = traj.symbol if symbol is None else symbol
    system = traj.system
    if quad is None:
        quad = default_quadrature(system, traj.indices, extra_periods=symbol.x_periods + 1)
    chi = traj.chi
    with np.errstate(over="ignore", invalid="ignore"):
        ddt = -np.exp(-chi * t) * np.sinh(chi * dt) / dt
    ddt = np.where(chi == 0, 0.0, ddt) * traj.modal
    dc = ddt if traj.W is None else traj.W @ ddt
    deriv = dc @ system.u(list(traj.indices), quad.nodes)
    tf = apply_operator(symbol, traj.u_coefficients(t), quad.nodes)
    r = deriv + tf
    return math.sqrt(float(np.abs(r) ** 2 @ quad.weights))


def sobolev_stability(traj, s_values=(0.0, 1.0, 2.0), times=None, riesz=None, rtol=1e-8):
    """Check ``||f(t)||_s <= (K1/k1)^2 max(1, e^{-min Re chi t}) ||f(0)||_s (1 + rtol)``.

    Returns a dict with per-time values, the bounds and a ``bounded`` verdict.
    """
    times = traj.times if times is None else np.asarray(times, dtype=float)
    if riesz is None:
        riesz = estimate_riesz_constants(traj.system, max(2, len(traj.indices)))
    factor = (riesz[1] / riesz[0]) ** 2
    chi_min = float(np.min(traj.chi.real))
    out = {"factor": factor, "chi_min_real": chi_min, "s": {}, "bounded": True}
    for s in s_values:
        h0 = traj.sobolev(0.0, s)
        vals, bounds = [], []
        for t in times:
            vals.append(traj.sobolev(t, s))
            bounds.append(factor * max(1.0, math.exp(-chi_min * t)) * h0 * (1.0 + rtol))
        ok = bool(np.all(np.asarray(vals) <= np.asarray(bounds)))
        out["s"][f"{s:g}"] = {"values": vals, "bounds": bounds, "bounded": ok}
        out["bounded"] = out["bounded"] and ok
    out["times"] = list(times)
    return out


# ---------------------------------------------------------------------------
# critical points and Morse reports

@dataclasses.dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    value: float
    offset_value: float
    hessian_det: float
    eigen_signs: tuple
    index: int

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class MorseReport:
    critical_points: tuple
    is_morse: bool
    distinct_values: bool
    count: int
    degenerate_everywhere: bool = False
    dropped_seeds: int = 0
    min_value_gap: float = math.inf
    tolerances: dict = None
    notes: tuple = ()

    @property
    def passes(self):
        return self.is_morse and self.distinct_values and not self.degenerate_everywhere

    def to_dict(self):
        return {
            "critical_points": [p.to_dict() for p in self.critical_points],
            "is_morse": self.is_morse,
            "distinct_values": self.distinct_values,
            "count": self.count,
            "degenerate_everywhere": self.degenerate_everywhere,
            "dropped_seeds": self.dropped_seeds,
            "min_value_gap": self.min_value_gap,
            "tolerances": self.tolerances or {},
            "notes": list(self.notes),
        }


def _seed_grid(system, per_dim, margin):
    axes = []
    for (lo, hi), per in zip(system.domain.box, system.periodic):
        if per:
            axes.append(lo + (hi - lo) * np.arange(per_dim) / per_dim)
        else:
            axes.append(np.linspace(lo + margin, hi - margin, per_dim))
    mesh = np.meshgrid(*axes, indexing="ij")
    return axes, np.stack([m.ravel() for m in mesh], axis=-1)


def _reduce(points, system):
    pts = np.array(points, dtype=float)
    for j, ((lo, hi), per) in enumerate(zip(system.domain.box, system.periodic)):
        if per:
            pts[:, j] = lo + np.mod(pts[:, j] - lo, hi - lo)
    return pts


def _periodic_distance(a, b, system):
    diff = np.abs(a - b)
    for j, ((lo, hi), per) in enumerate(zip(system.domain.box, system.periodic)):
        if per:
            diff[..., j] = np.minimum(diff[..., j], (hi - lo) - diff[..., j])
    return np.sqrt(np.sum(diff ** 2, axis=-1))


def _normalized(f, scale):
    return Expansion(f.system, f.indices, f.coeffs / scale, f.basis_cache)


def critical_points(f, grid_per_dim=64, newton_tol=1e-12, max_iter=50, dedup=1e-6,
                    boundary_margin=1e-3):
    """Locate critical points of a real expansion.

    Seeds are grid points where ``|grad f|`` is a local minimum; each seed is
    refined by Newton's method with the analytic Hessian until
    ``|grad f| <= newton_tol * G`` (G the largest grid gradient norm).
    Periodic coordinates are reduced modulo the period; in non-periodic
    coordinates seeds and points within ``boundary_margin`` of the boundary
    are dropped.

    Returns
    -------
    points : ndarray, shape (K, d)
    info : dict
        ``dropped`` (seeds that did not converge or left the domain),
        ``coef_scale`` (largest non-constant coefficient magnitude) and
        ``grad_scale``, ``hess_scale``, ``value_range`` measured on
        ``f / coef_scale``, plus ``degenerate_everywhere``.
    """
    system = f.system
    d = system.dimension
    axes, grid = _seed_grid(system, grid_per_dim, boundary_margin)
    live = np.abs(f.coeffs) * (1.0 - f.constant_mask)
    coef_scale = float(np.max(live)) if live.size else 0.0
    info = {"grad_scale": 0.0, "hess_scale": 0.0, "value_range": 0.0, "coef_scale": coef_scale,
            "dropped": 0, "degenerate_everywhere": False, "seeds": 0}
    if coef_scale == 0.0:
        info["degenerate_everywhere"] = True
        return np.zeros((0, d)), info
    # critical points are scale invariant; work at unit scale to avoid underflow
    f = _normalized(f, coef_scale)
    g = f.gradient(grid).real
    gnorm = np.sqrt(np.sum(g ** 2, axis=-1))
    hs = f.hessian(grid).real
    vals = f.value(grid, constant=False).real
    grad_scale = float(np.max(gnorm))
    info.update(grad_scale=grad_scale, hess_scale=float(np.max(np.abs(hs))),
                value_range=float(np.ptp(vals)))
    if grad_scale <= 1e-14:
        info["degenerate_everywhere"] = True
        return np.zeros((0, d)), info
    shape = tuple(len(a) for a in axes)
    gn = gnorm.reshape(shape)
    modes = ["wrap" if p else "nearest" for p in system.periodic]
    local_min = gn == ndimage.minimum_filter(gn, size=3, mode=modes)
    seeds = grid[local_min.ravel()]
    info["seeds"] = int(seeds.shape[0])
    x = seeds.copy()
    active = np.ones(x.shape[0], dtype=bool)
    converged = np.zeros(x.shape[0], dtype=bool)
    lo = np.array([b[0] for b in system.domain.box])
    hi = np.array([b[1] for b in system.domain.box])
    per = np.array(system.periodic)
    for _ in range(max_iter):
        if not np.any(active):
            break
        ids = np.flatnonzero(active)
        gx = f.gradient(x[ids]).real
        ok = np.sqrt(np.sum(gx ** 2, axis=-1)) <= newton_tol * grad_scale
        converged[ids[ok]] = True
        active[ids[ok]] = False
        ids = ids[~ok]
        if ids.size == 0:
            break
        hx = f.hessian(x[ids]).real
        try:
            step = np.linalg.solve(hx, gx[~ok][..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(h, gv, rcond=None)[0] for h, gv in zip(hx, gx[~ok])])
        x[ids] = x[ids] - step
        x[ids] = np.where(per[None, :], lo + np.mod(x[ids] - lo, hi - lo), x[ids])
        outside = np.any(~per[None, :] & ((x[ids] < lo + boundary_margin)
                                          | (x[ids] > hi - boundary_margin)), axis=1)
        bad = outside | ~np.all(np.isfinite(x[ids]), axis=1)
        active[ids[bad]] = False
    info["dropped"] = int(np.sum(~converged))
    pts = _reduce(x[converged], system)
    uniq = []
    for p in pts:
        if not uniq or np.min(_periodic_distance(np.array(uniq), p, system)) > dedup:
            uniq.append(p)
    uniq = np.array(uniq).reshape(-1, d)
    key = np.lexsort([np.round(uniq[:, j], 8) for j in range(d - 1, -1, -1)]) if len(uniq) else []
    return uniq[key], info


def morse_report(f, grid_per_dim=64, newton_tol=1e-12, det_rtol=1e-8, gap_rtol=1e-8,
                 **kwargs):
    """Critical points with Hessian data and the Morse / distinct-value verdicts.

    Both tests run on ``f / coef_scale`` (see ``critical_points``); reported
    values, offsets and determinants are in the original scale.
    A point is degenerate when ``|det H| <= det_rtol * S^d`` with S the largest
    Hessian entry over the seed grid. Values are compared after removing
    constant modes, and are distinct when every pairwise gap exceeds
    ``gap_rtol`` times the oscillation range of f.
    """
    pts, info = critical_points(f, grid_per_dim=grid_per_dim, newton_tol=newton_tol, **kwargs)
    d = f.system.dimension
    tol = {"det_rtol": det_rtol, "gap_rtol": gap_rtol, "newton_tol": newton_tol,
           "grad_scale": info["grad_scale"], "hess_scale": info["hess_scale"],
           "value_range": info["value_range"]}
    notes = ["boundary-adjacent points excluded in non-periodic coordinates"]
    if info["degenerate_everywhere"]:
        return MorseReport(critical_points=(), is_morse=False, distinct_values=False, count=0,
                           degenerate_everywhere=True, dropped_seeds=info["dropped"],
                           tolerances=tol, notes=tuple(notes) + ("no isolated critical points",))
    cps = []
    scale = info["coef_scale"]
    fn = _normalized(f, scale)
    dets = []
    if len(pts):
        vals = f.value(pts).real
        offs = fn.value(pts, constant=False).real
        hs = fn.hessian(pts).real
        for p, v, o, h in zip(pts, vals, offs, hs):
            ev = np.linalg.eigvalsh(0.5 * (h + h.T))
            det = float(np.linalg.det(h))
            dets.append(det)
            cps.append(CriticalPoint(location=tuple(float(c) for c in p), value=float(v),
                                     offset_value=float(o) * scale,
                                     hessian_det=det * scale ** d,
                                     eigen_signs=tuple(int(np.sign(e)) for e in ev),
                                     index=int(np.sum(ev < 0))))
    det_tol = det_rtol * info["hess_scale"] ** d
    is_morse = bool(cps) and all(abs(v) > det_tol for v in dets)
    offs = np.array([c.offset_value for c in cps]) / scale
    gap = float(np.min(np.diff(np.sort(offs)))) if offs.size > 1 else math.inf
    distinct = bool(cps) and gap > gap_rtol * info["value_range"]
    return MorseReport(critical_points=tuple(cps), is_morse=is_morse, distinct_values=distinct,
                       count=len(cps), dropped_seeds=info["dropped"], min_value_gap=gap * scale,
                       tolerances=tol, notes=tuple(notes))


@dataclasses.dataclass(frozen=True)
class EmergenceResult:
    found: bool
    T: float
    count: int
    times: tuple
    passes: tuple
    counts: tuple
    last_report: MorseReport

    def to_dict(self):
        return {"found": self.found, "T": self.T if self.found else None,
                "count": self.count if self.found else None,
                "times": list(self.times), "passes": list(self.passes),
                "counts": list(self.counts), "last_report": self.last_report.to_dict()}


def morse_emergence(symbol, f0, t_grid=None, N=None, grid_per_dim=64, real_rtol=1e-10):
    """Smallest grid time from which ``f(t)`` stays Morse with distinct values
    and a constant critical-point count.

    The system must be real-valued or ``f0`` must be real to ``real_rtol``.
    """
    system = symbol.system
    t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    times = np.concatenate([[0.0], t_grid[t_grid > 0]])
    traj = heat_solve(symbol, f0, times, N=N, s_values=())
    if not system.real_valued:
        probe = default_quadrature(system, traj.indices).nodes
        if traj.expansion(0.0).imaginary_ratio(probe) > real_rtol:
            raise PreconditionError("initial data is not real-valued")
    grid_times = traj.times[1:] if t_grid[0] > 0 else traj.times
    cache = {}
    reports = [morse_report(traj.expansion(t, cache), grid_per_dim=grid_per_dim)
               for t in grid_times]
    passes = [r.passes for r in reports]
    counts = [r.count for r in reports]
    T, n = None, None
    for i in range(len(reports) - 1, -1, -1):
        if not passes[i] or (n is not None and counts[i] != n):
            break
        T, n = float(grid_times[i]), counts[i]
    return EmergenceResult(found=T is not None, T=T if T is not None else math.nan,
                           count=n if n is not None else 0, times=tuple(grid_times.tolist()),
                           passes=tuple(passes), counts=tuple(counts), last_report=reports[-1])


# ---------------------------------------------------------------------------
# twisted two-mode example

@dataclasses.dataclass(frozen=True)
class TwistedTrigHessian:
    closed_form: float
    numeric: float
    relative_gap: float
    printed_formula: float
    value: float
    analytic: float

    def __iter__(self):
        return iter((self.closed_form, self.numeric))


def _twisted_parts(h, a0, a, b, x):
    h = np.asarray(h, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    c = np.log(h) / (2.0 * math.pi)
    return h, c, float(a0), a, b, x


def twisted_trig_function(h, a0, a, b):
    """``f(x) = h^{x/2pi} (a0 + sum_j a_j cos x_j + b_j sin x_j)`` as a callable on (P, d) points."""
    _, c, a0, a, b, _ = _twisted_parts(h, a0, a, b, [0.0])

    def f(points):
        p = np.atleast_2d(points)
        return np.exp(p @ c) * (a0 + np.cos(p) @ a + np.sin(p) @ b)

    return f


def _twisted_extended(h, a0, a, b):
    ld = np.longdouble
    c = (np.log(np.asarray(h, dtype=float)) / (2.0 * math.pi)).astype(ld)
    a = np.asarray(a, dtype=ld)
    b = np.asarray(b, dtype=ld)

    def f(points):
        p = np.atleast_2d(points).astype(ld)
        return np.exp(p @ c) * (ld(a0) + np.cos(p) @ a + np.sin(p) @ b)

    return f


def _fd_hessian(f, x, step):
    x = np.asarray(x, dtype=np.longdouble)
    step = np.longdouble(step)
    d = x.size
    e = np.eye(d) * step
    f0 = f(x[None, :])[0]
    hmat = np.zeros((d, d), dtype=np.longdouble)
    for j in range(d):
        hmat[j, j] = (f((x + e[j])[None])[0] - 2 * f0 + f((x - e[j])[None])[0]) / step ** 2
        for k in range(j + 1, d):
            v = (f((x + e[j] + e[k])[None])[0] - f((x + e[j] - e[k])[None])[0]
                 - f((x - e[j] + e[k])[None])[0] + f((x - e[j] - e[k])[None])[0]) / (4 * step ** 2)
            hmat[j, k] = hmat[k, j] = v
    return hmat


def twisted_trig_hessian(h, a0, a, b, x, step=1e-4, grad_tol=1e-8):
    """Closed-form and finite-difference Hessian determinants at a critical point (d = 2).

    With ``H = h^{x/2pi}``, ``c_j = ln h_j / 2pi``, ``A_j = sqrt(a_j^2 + b_j^2)``,
    ``phi_j = atan2(b_j, -a_j)`` and ``theta_j = x_j + phi_j``, at a critical
    point the Hessian is ``H (c_j g_k' + delta_jk g_j'')`` with
    ``g_j' = A_j sin theta_j`` and ``g_j'' = A_j cos theta_j``, so

        det = H^2 A1 A2 [(cos t1 + c1 sin t1)(cos t2 + c2 sin t2) - c1 c2 sin t1 sin t2].

    ``printed_formula`` carries ``((1 + c1)(1 + c2) - c1 c2) A1 A2 sin t1 sin t2``
    for comparison. The numeric value is the Richardson extrapolation of
    central differences with steps ``2 * step`` and ``step``, evaluated in
    ``np.longdouble``.
    """
    h, c, a0, a, b, x = _twisted_parts(h, a0, a, b, x)
    if x.size != 2 or h.size != 2:
        raise PreconditionError("the closed form is for d = 2")
    f = twisted_trig_function(h, a0, a, b)
    big_h = math.exp(float(c @ x))
    gvals = a0 + float(np.cos(x) @ a + np.sin(x) @ b)
    grad = c * big_h * gvals + big_h * (b * np.cos(x) - a * np.sin(x))
    scale = max(1.0, big_h * (abs(a0) + float(np.sum(np.hypot(a, b)))))
    if np.linalg.norm(grad) > grad_tol * scale:
        raise PreconditionError(f"x is not a critical point (|grad f| = {np.linalg.norm(grad):.2e})")
    amp = np.hypot(a, b)
    phi = np.arctan2(b, -a)
    th = x + phi
    s, co = np.sin(th), np.cos(th)
    closed = big_h ** 2 * amp[0] * amp[1] * (
        (co[0] + c[0] * s[0]) * (co[1] + c[1] * s[1]) - c[0] * c[1] * s[0] * s[1])
    printed = ((1 + c[0]) * (1 + c[1]) - c[0] * c[1]) * amp[0] * amp[1] * s[0] * s[1]
    # differences run in extended precision so roundoff stays below the O(step^4) error
    fx = _twisted_extended(h, a0, a, b)
    h1 = _fd_hessian(fx, x, 2.0 * step)
    h2 = _fd_hessian(fx, x, step)
    hr = (4 * h2 - h1) / 3
    numeric = float(hr[0, 0] * hr[1, 1] - hr[0, 1] * hr[1, 0])
    # analytic Hessian of f for reference
    g1 = b * np.cos(x) - a * np.sin(x)
    g2 = -(a * np.cos(x) + b * np.sin(x))
    ha = big_h * (np.outer(c, c) * gvals + np.outer(c, g1) + np.outer(g1, c) + np.diag(g2))
    gap = abs(closed - numeric) / max(abs(numeric), 1e-300)
    return TwistedTrigHessian(closed_form=float(closed), numeric=numeric, relative_gap=float(gap),
                            printed_formula=float(printed), value=float(big_h * gvals),
                            analytic=float(np.linalg.det(ha)))
