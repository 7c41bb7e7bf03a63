"""Symbols sigma(x, xi), the operators they quantize, and compactness diagnostics.

``T_sigma f(x) = sum_xi sigma(x, xi) f_hat(xi) u_xi(x)``, with the starred
variant ``sum_xi tau(x, xi) f_hat_*(xi) v_xi(x)``.
"""

import dataclasses
import math

import numpy as np

from ._sup import grid_sup, refine_row
from .basis import _as_points
from .errors import ConstructionError, PreconditionError
from .symexpr import SymbolExpr, evaluate_array, parse
from .transform import default_quadrature

__all__ = [
    "Symbol",
    "GohbergEstimate",
    "CompactnessVerdict",
    "CoefficientDecay",
    "apply_operator",
    "apply_operator_star",
    "gohberg_d",
    "compactness_verdict",
    "symbol_coefficient_decay",
    "DEFAULT_SHELL_RADII",
]

DEFAULT_SHELL_RADII = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
VERDICTS = ("compact-indicated", "not-compact-indicated", "inconclusive")


def _as_expr(e):
    if isinstance(e, SymbolExpr):
        return e
    if isinstance(e, str):
        return parse(e)
    return None


def _env_xi(system, idx):
    env = {f"xi{j + 1}": idx[:, j].astype(float)[:, None] for j in range(idx.shape[1])}
    env["bracket"] = system.bracket_from_lambda(system._lambda(idx))[:, None]
    return env


def _env_x(points):
    return {f"x{j + 1}": points[:, j][None, :] for j in range(points.shape[1])}


class Symbol:
    """A symbol bound to a biorthogonal system.

    Use the constructors :meth:`multiplier`, :meth:`separable`,
    :meth:`general`, :meth:`from_expression` and :meth:`constant`.

    Attributes
    ----------
    kind : {"multiplier", "separable", "general"}
    system : BiorthogonalSystem
    label : str
        Human-readable description used in reports.
    x_periods : float
        Oscillation periods per dimension contributed by the x-dependence;
        feeds the default quadrature order.
    """

    def __init__(self, system, kind, label, mult=None, alpha=None, potential=None,
                 general=None, x_periods=0.0):
        self.system = system
        self.kind = kind
        self.label = label
        self._mult = mult
        self._alpha = alpha
        self._potential = potential
        self._general = general
        self.x_periods = float(x_periods)

    # ---- constructors -------------------------------------------------
    @classmethod
    def multiplier(cls, system, sigma, label=None):
        """``sigma(xi)``: an expression in xi/bracket, or ``callable(idx) -> (N,)``
        where ``idx`` is an integer array of shape (N, l)."""
        expr = _as_expr(sigma)
        if expr is not None:
            expr.validate(system.dimension, system.index_dim)
            if expr.depends_on_x():
                raise ConstructionError(f"multiplier '{expr.text}' depends on x")

            def fn(idx, expr=expr):
                vals = evaluate_array(expr.ast, _env_xi(system, idx))
                return np.broadcast_to(vals, (idx.shape[0], 1))[:, 0].astype(complex)

            return cls(system, "multiplier", label or expr.text, mult=fn)
        if not callable(sigma):
            raise ConstructionError("multiplier needs an expression or a callable")
        return cls(system, "multiplier", label or "multiplier(callable)",
                   mult=lambda idx: np.asarray(sigma(idx), dtype=complex).reshape(-1))

    @classmethod
    def separable(cls, system, alpha, potential, label=None, x_periods=None):
        """``alpha(xi) + V(x)``; ``alpha`` as for :meth:`multiplier`, ``V`` an
        expression in x or ``callable(points) -> (P,)``."""
        a = cls.multiplier(system, alpha)
        vexpr = _as_expr(potential)
        if vexpr is not None:
            vexpr.validate(system.dimension, system.index_dim)
            if vexpr.depends_on_xi():
                raise ConstructionError(f"potential '{vexpr.text}' depends on xi")

            def pot(points, vexpr=vexpr):
                vals = evaluate_array(vexpr.ast, _env_x(points))
                return np.broadcast_to(vals, (1, points.shape[0]))[0].astype(complex)

            vlabel = vexpr.text
        elif callable(potential):
            def pot(points):
                return np.asarray(potential(points), dtype=complex).reshape(-1)

            vlabel = "V(callable)"
        else:
            raise ConstructionError("potential needs an expression or a callable")
        lab = label or f"{a.label} + ({vlabel})"
        return cls(system, "separable", lab, alpha=a._mult, potential=pot,
                   x_periods=4.0 if x_periods is None else x_periods)

    @classmethod
    def general(cls, system, sigma, label=None, x_periods=None):
        """``sigma(x, xi)``: an expression, or ``callable(points, idx) -> (N, P)``."""
        expr = _as_expr(sigma)
        if expr is not None:
            expr.validate(system.dimension, system.index_dim)

            def gen(points, idx, expr=expr):
                env = _env_xi(system, idx)
                env.update(_env_x(points))
                vals = evaluate_array(expr.ast, env)
                return np.broadcast_to(vals, (idx.shape[0], points.shape[0])).astype(complex)

            xp = (4.0 if expr.depends_on_x() else 0.0) if x_periods is None else x_periods
            return cls(system, "general", label or expr.text, general=gen, x_periods=xp)
        if not callable(sigma):
            raise ConstructionError("general symbol needs an expression or a callable")
        return cls(system, "general", label or "sigma(callable)",
                   general=lambda p, i: np.asarray(sigma(p, i), dtype=complex),
                   x_periods=4.0 if x_periods is None else x_periods)

    @classmethod
    def from_expression(cls, system, text, x_periods=None):
        """Multiplier when the expression has no x-dependence, general otherwise."""
        expr = _as_expr(text)
        expr.validate(system.dimension, system.index_dim)
        if not expr.depends_on_x():
            return cls.multiplier(system, expr)
        return cls.general(system, expr, x_periods=x_periods)

    @classmethod
    def constant(cls, system, c):
        c = complex(c)
        return cls(system, "multiplier", f"{c.real:g}" if c.imag == 0 else f"{c}",
                   mult=lambda idx: np.full(idx.shape[0], c))

    # ---- evaluation ---------------------------------------------------
    def multiplier_values(self, indices):
        """``sigma(xi)`` for multipliers, the ``alpha(xi)`` part for separable symbols."""
        idx = self.system.as_index_array(indices)
        if self.kind == "multiplier":
            return self._mult(idx)
        if self.kind == "separable":
            return self._alpha(idx)
        raise PreconditionError("general symbols have no multiplier part")

    def potential_values(self, points):
        if self.kind != "separable":
            raise PreconditionError("only separable symbols have a potential")
        return self._potential(_as_points(points, self.system.dimension))

    def values(self, points, indices):
        """``sigma(x_p, xi_n)`` as an array of shape (N, P)."""
        idx = self.system.as_index_array(indices)
        pts = _as_points(points, self.system.dimension)
        n, p = idx.shape[0], pts.shape[0]
        if self.kind == "multiplier":
            return np.broadcast_to(self._mult(idx)[:, None], (n, p))
        if self.kind == "separable":
            return self._alpha(idx)[:, None] + self._potential(pts)[None, :]
        return np.broadcast_to(self._general(pts, idx), (n, p))

    def depends_on_x(self):
        return self.kind != "multiplier"

    # ---- derived symbols ----------------------------------------------
    def shifted(self, lam):
        """The symbol ``sigma - lam``."""
        lam = complex(lam)
        lab = f"{self.label} - ({lam.real:g}{'' if lam.imag == 0 else f'{lam.imag:+g}j'})"
        if self.kind == "multiplier":
            return Symbol(self.system, "multiplier", lab, mult=lambda i: self._mult(i) - lam)
        if self.kind == "separable":
            return Symbol(self.system, "separable", lab, alpha=lambda i: self._alpha(i) - lam,
                          potential=self._potential, x_periods=self.x_periods)
        return Symbol(self.system, "general", lab,
                      general=lambda p, i: self._general(p, i) - lam, x_periods=self.x_periods)

    def conj(self):
        lab = f"conj({self.label})"
        if self.kind == "multiplier":
            return Symbol(self.system, "multiplier", lab, mult=lambda i: np.conj(self._mult(i)))
        if self.kind == "separable":
            return Symbol(self.system, "separable", lab, alpha=lambda i: np.conj(self._alpha(i)),
                          potential=lambda p: np.conj(self._potential(p)),
                          x_periods=self.x_periods)
        return Symbol(self.system, "general", lab,
                      general=lambda p, i: np.conj(self._general(p, i)),
                      x_periods=self.x_periods)

    def describe(self):
        return {"kind": self.kind, "label": self.label}

    def __repr__(self):
        return f"Symbol({self.kind}: {self.label})"


def _apply(sigma, coeffs, x, kind):
    if coeffs.system is not sigma.system:
        raise PreconditionError("symbol and coefficients belong to different systems")
    if coeffs.kind != kind:
        raise PreconditionError(f"expected {kind} coefficients, got {coeffs.kind}")
    system = sigma.system
    pts = _as_points(x, system.dimension)
    if coeffs.indices:
        idx = list(coeffs.indices)
        basis = system.u(idx, pts) if kind == "L" else system.v(idx, pts)
        out = np.sum(coeffs.values[:, None] * sigma.values(pts, idx) * basis, axis=0)
    else:
        out = np.zeros(pts.shape[0], dtype=complex)
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and system.dimension > 1
                                 and np.shape(x)[0] == system.dimension)
    return complex(out[0]) if single else out


def apply_operator(sigma, fhat, x):
    """``sum_xi sigma(x, xi) f_hat(xi) u_xi(x)`` at one point or an array of points."""
    return _apply(sigma, fhat, x, "L")


def apply_operator_star(tau, fhat_star, x):
    """``sum_xi tau(x, xi) f_hat_*(xi) v_xi(x)`` at one point or an array of points."""
    return _apply(tau, fhat_star, x, "Lstar")


# ---------------------------------------------------------------------------
# Gohberg indicator

@dataclasses.dataclass(frozen=True)
class GohbergEstimate:
    """Shell maxima ``s_k = max_{xi in shell k} sup_x |sigma(x, xi)|``.

    Shell k collects indices with ``radii[k] <= <xi> < radii[k+1]``.
    ``d_hat`` is the max of the last two shell values, or ``inf`` when the
    last value exceeds ``cap``. This is an estimator, not a certificate.
    """

    radii: tuple
    shell_values: tuple
    shell_sizes: tuple
    d_hat: float
    diverged: bool
    monotonicity: str
    max_bracket: float
    estimator_not_certificate: bool = True

    def to_dict(self):
        return {
            "radii": list(self.radii),
            "shell_values": list(self.shell_values),
            "shell_sizes": list(self.shell_sizes),
            "d_hat": self.d_hat,
            "diverged": self.diverged,
            "monotonicity": self.monotonicity,
            "max_bracket": self.max_bracket,
            "estimator_not_certificate": True,
        }


def _monotonicity(vals):
    v = np.asarray(vals)
    if v.size < 2:
        return "constant"
    diff = np.diff(v)
    scale = max(np.max(np.abs(v)), 1e-300)
    if np.all(np.abs(diff) <= 1e-12 * scale):
        return "constant"
    if np.all(diff <= 1e-12 * scale):
        return "nonincreasing"
    if np.all(diff >= -1e-12 * scale):
        return "nondecreasing"
    return "mixed"


def _shell_sup(sigma, idx, grid_per_dim, n_refine=3):
    """max over the rows of ``idx`` of the estimated ``sup_x |sigma(x, xi)|``."""
    if sigma.kind == "multiplier":
        return float(np.max(np.abs(sigma._mult(idx))))
    box = sigma.system.domain.box

    def fun(points, rows):
        return sigma.values(points, idx[rows])

    best, where = grid_sup(fun, idx.shape[0], box, grid_per_dim)
    top = np.argsort(-best, kind="stable")[:n_refine]
    out = float(np.max(best))
    for k in top:
        v, _ = refine_row(fun, int(k), where[k], box, grid_per_dim)
        out = max(out, v)
    return out


def gohberg_d(sigma, shells=None, grid_per_dim=256, cap=1e2):
    """Estimate ``d_sigma = limsup_{<xi> -> inf} sup_x |sigma(x, xi)|`` on bracket shells.

    Parameters
    ----------
    shells : sequence of float, optional
        Increasing shell radii; at least 4 radii (3 shells). With the default
        ``(1, 2, 4, ..., 32)`` empty shells are dropped; explicitly passed
        empty shells raise PreconditionError.
    grid_per_dim : int
        Grid points per dimension for ``sup_x``.
    cap : float
        A last shell value above ``cap`` reports ``d_hat = inf``.
    """
    system = sigma.system
    explicit = shells is not None
    radii = [float(r) for r in (shells if explicit else DEFAULT_SHELL_RADII)]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("shell radii must be strictly increasing")
    all_idx = system.as_index_array(system.indices_below(radii[-1]))
    brk = system.bracket_from_lambda(system._lambda(all_idx))
    kept_r, vals, sizes = [], [], []
    for lo, hi in zip(radii, radii[1:]):
        sel = all_idx[(brk >= lo) & (brk < hi)]
        if sel.shape[0] == 0:
            if explicit:
                raise PreconditionError(f"bracket shell [{lo:g}, {hi:g}) is empty for {system.name}")
            continue
        kept_r.append((lo, hi))
        sizes.append(int(sel.shape[0]))
        vals.append(_shell_sup(sigma, sel, grid_per_dim))
    if len(vals) < 3:
        raise PreconditionError(f"need at least 3 nonempty shells, got {len(vals)}")
    diverged = vals[-1] > cap
    d_hat = math.inf if diverged else max(vals[-1], vals[-2])
    return GohbergEstimate(
        radii=tuple(r for pair in kept_r for r in pair[:1]) + (kept_r[-1][1],),
        shell_values=tuple(vals), shell_sizes=tuple(sizes), d_hat=d_hat,
        diverged=diverged, monotonicity=_monotonicity(vals),
        max_bracket=float(np.max(brk)))


@dataclasses.dataclass(frozen=True)
class CompactnessVerdict:
    verdict: str
    criterion: str
    estimate: GohbergEstimate
    tol: float
    section_singular_values: tuple = None
    assumptions: tuple = ()

    def to_dict(self):
        out = {
            "verdict": self.verdict,
            "criterion": self.criterion,
            "tol": self.tol,
            "gohberg": self.estimate.to_dict(),
            "assumptions": list(self.assumptions),
            "estimator_not_certificate": True,
        }
        if self.section_singular_values is not None:
            sv = np.asarray(self.section_singular_values)
            out["section_singular_values"] = {"min": float(sv.min()), "max": float(sv.max()),
                                              "count": int(sv.size)}
        return out


def compactness_verdict(sigma, tol=0.1, stabilize_rtol=1e-3, shells=None,
                        grid_per_dim=256, cap=1e2, section_size=None, estimate=None):
    """Classify ``T_sigma`` from its Gohberg shell sequence.

    * compact-indicated: shell values nonincreasing and the last one < ``tol``
    * not-compact-indicated: the last two values agree to ``stabilize_rtol``
      and sit at or above ``tol``, or the sequence diverged past ``cap``
    * inconclusive: anything else

    For multipliers the shells hold ``|sigma(xi)|`` itself, i.e. the
    criterion ``|sigma(xi)| -> 0``. With ``section_size`` the singular values
    of that finite section of the associated matrix are attached as
    evidence (none may fall below ``d_sigma``).
    """
    est = estimate if estimate is not None else gohberg_d(
        sigma, shells=shells, grid_per_dim=grid_per_dim, cap=cap)
    vals = np.asarray(est.shell_values)
    if est.diverged:
        verdict = "not-compact-indicated"
    elif est.monotonicity in ("nonincreasing", "constant") and vals[-1] < tol:
        verdict = "compact-indicated"
    elif vals[-1] >= tol and abs(vals[-1] - vals[-2]) <= stabilize_rtol * vals[-1]:
        verdict = "not-compact-indicated"
    else:
        verdict = "inconclusive"
    criterion = "multiplier |sigma(xi)| -> 0" if sigma.kind == "multiplier" else "gohberg d_sigma"
    assumptions = () if sigma.kind == "multiplier" else (
        "symbol of order zero (Hormander class) assumed, not verified",)
    sv = None
    if section_size is not None:
        from .matrix import build_matrix
        m = build_matrix(sigma, int(section_size))
        sv = tuple(np.linalg.svd(m.entries, compute_uv=False).tolist())
    return CompactnessVerdict(verdict=verdict, criterion=criterion, estimate=est, tol=tol,
                              section_singular_values=sv, assumptions=assumptions)


# ---------------------------------------------------------------------------
# symbol coefficient decay

@dataclasses.dataclass(frozen=True)
class CoefficientDecay:
    """``table[eta] = max_xi |sigma_hat(eta, xi)|`` with
    ``sigma_hat(eta, xi) = int sigma(x, xi) conj(v_eta(x)) dmu``."""

    indices: tuple
    table: np.ndarray
    partial_sums: np.ndarray
    bounded: bool
    under_resolved: bool

    def to_dict(self):
        return {"indices": [list(k) for k in self.indices], "table": self.table,
                "partial_sums": self.partial_sums, "bounded": self.bounded,
                "under_resolved": self.under_resolved, "estimator_not_certificate": True}


def symbol_coefficient_decay(sigma, N, quad=None, tol=1e-10):
    """Table of ``sup_xi |sigma_hat(eta, xi)|`` over the first N indices and its partial sums.

    ``bounded`` is set when the partial sums change by less than 1% over the
    last tenth of the table (heuristic convergence evidence).
    """
    system = sigma.system
    indices = system.enumerate(N)
    if quad is None:
        quad = default_quadrature(system, indices, extra_periods=sigma.x_periods)

    def table_for(rule):
        s = sigma.values(rule.nodes, indices)             # (xi, P)
        v = system.v(indices, rule.nodes).conj()          # (eta, P)
        return (v * rule.weights[None, :]) @ s.T          # (eta, xi)

    hat = table_for(quad)
    change = float(np.max(np.abs(hat - table_for(quad.doubled()))))
    table = np.max(np.abs(hat), axis=1)
    sums = np.cumsum(table)
    tail = max(1, len(sums) // 10)
    ref = sums[-tail - 1] if len(sums) > tail else 0.0
    bounded = bool(sums[-1] > 0 and abs(sums[-1] - ref) < 0.01 * sums[-1])
    return CoefficientDecay(indices=tuple(indices), table=table, partial_sums=sums,
                            bounded=bounded, under_resolved=change > tol * max(1.0, table.max()))
