"""Quadrature, the L- and L*-Fourier transforms, inversion, Parseval and norms.

For a biorthogonal system ``(u_xi, v_xi)`` on the normalized measure dmu:

    f_hat(xi)   = int f conj(v_xi) dmu,     f = sum_xi f_hat(xi) u_xi
    f_hat_*(xi) = int f conj(u_xi) dmu,     f = sum_xi f_hat_*(xi) v_xi
"""

import dataclasses
import math
import warnings

import numpy as np

from ._quad import QuadratureRule, gauss_legendre_box
from .basis import _as_points, default_gram_order, sup_norms
from .errors import NumericalFailure, PreconditionError
from .report import csv_text, fmt

__all__ = [
    "QuadratureRule",
    "GridFunction",
    "SpectralCoefficients",
    "SobolevConsistencyWarning",
    "build_quadrature",
    "default_quadrature",
    "forward_transform",
    "adjoint_transform",
    "inverse_transform",
    "parseval",
    "parseval_mixed",
    "lp_norm",
    "sobolev_norm",
]

KINDS = ("L", "Lstar")


class SobolevConsistencyWarning(UserWarning):
    """The Sobolev pairing has a non-negligible imaginary part."""


def build_quadrature(domain, order_per_dim):
    """Tensor Gauss-Legendre rule on ``domain.box`` with weights summing to 1."""
    return gauss_legendre_box(domain.box, order_per_dim)


def default_quadrature(system, indices, extra_periods=0.0):
    """Rule resolving pairings among ``indices`` plus ``extra_periods`` more
    oscillations per dimension: ``4 * (frequency in play) + 16`` points."""
    return gauss_legendre_box(system.domain.box,
                              default_gram_order(system, indices, extra_periods))


@dataclasses.dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a function at the nodes of a quadrature rule.

    ``fun`` keeps the generating callable, when known, so transforms can
    re-sample on a doubled rule for the resolution check.
    """

    values: np.ndarray
    rule: QuadratureRule
    fun: object = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        if vals.shape[0] != self.rule.size:
            raise ValueError(f"{vals.shape[0]} values for {self.rule.size} nodes")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, fun, rule):
        return cls(np.asarray(fun(rule.nodes), dtype=complex), rule, fun)

    def l2_norm(self):
        return math.sqrt(float(np.abs(self.values) ** 2 @ self.rule.weights))

    def to_csv(self):
        d = self.rule.dimension
        rows = [[fmt(c) for c in node] + [fmt(v.real), fmt(v.imag)]
                for node, v in zip(self.rule.nodes, self.values)]
        return csv_text([f"x{j + 1}" for j in range(d)] + ["re", "im"], rows)


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Coefficients over an ordered truncation; absent indices read as 0.

    ``kind`` is ``"L"`` for ``f_hat`` (reconstruct with ``u``) or ``"Lstar"``
    for ``f_hat_*`` (reconstruct with ``v``).
    """

    indices: tuple
    values: np.ndarray
    system: object
    kind: str = "L"
    under_resolved: bool = False
    doubling_change: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        arr = self.system.as_index_array(list(self.indices) if self.indices else
                                         np.zeros((0, self.system.index_dim), int))
        idx = tuple(tuple(int(c) for c in row) for row in arr)
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        if vals.shape[0] != len(idx):
            raise ValueError("one value per index required")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_pos", {k: i for i, k in enumerate(idx)})

    @classmethod
    def from_mapping(cls, system, mapping, kind="L", indices=None):
        """Build from ``{index: value}``; ``indices`` fixes the truncation order."""
        norm = {_key(k): complex(v) for k, v in mapping.items()}
        if indices is None:
            indices = list(norm)
        else:
            indices = [_key(k) for k in indices]
            missing = set(norm) - set(indices)
            if missing:
                raise ValueError(f"indices {sorted(missing)} are outside the truncation")
        return cls(tuple(indices), np.array([norm.get(k, 0j) for k in indices]), system, kind)

    def __getitem__(self, xi):
        i = self._pos.get(_key(xi))
        return 0j if i is None else complex(self.values[i])

    def __len__(self):
        return len(self.indices)

    def as_dict(self):
        return dict(zip(self.indices, self.values.tolist()))

    def with_values(self, values, kind=None):
        return SpectralCoefficients(self.indices, values, self.system, kind or self.kind)

    def to_dict(self):
        return {
            "system": self.system.describe(),
            "truncation": len(self.indices),
            "kind": self.kind,
            "under_resolved": self.under_resolved,
            "entries": [{"index": list(k), "value": complex(v)}
                        for k, v in zip(self.indices, self.values)],
        }

    def to_csv(self):
        l = self.system.index_dim
        rows = [list(k) + [fmt(v.real), fmt(v.imag)] for k, v in zip(self.indices, self.values)]
        return csv_text([f"xi{j + 1}" for j in range(l)] + ["re", "im"], rows)


def _key(xi):
    if isinstance(xi, (int, np.integer)):
        return (int(xi),)
    return tuple(int(c) for c in xi)


def _transform(f, system, indices, quad, partner, kind, tol, fun=None):
    indices = [_key(k) for k in indices]
    if isinstance(f, GridFunction):
        quad = f.rule
        values = f.values
        fun = f.fun
    else:
        fun = f
        if quad is None:
            quad = default_quadrature(system, indices, extra_periods=0)
        values = np.asarray(fun(quad.nodes), dtype=complex).reshape(-1)

    def coeffs(rule, vals):
        return (partner(indices, rule.nodes).conj() * rule.weights[None, :]) @ vals

    c = coeffs(quad, values)
    change, flag = 0.0, False
    if fun is not None:
        q2 = quad.doubled()
        c2 = coeffs(q2, np.asarray(fun(q2.nodes), dtype=complex).reshape(-1))
        change = float(np.max(np.abs(c - c2))) if c.size else 0.0
        flag = change > tol
    return SpectralCoefficients(tuple(indices), c, system, kind,
                                under_resolved=flag, doubling_change=change)


def forward_transform(f, system, indices, quad=None, tol=1e-10):
    """``f_hat(xi) = sum_nodes w f conj(v_xi)`` for each requested index.

    Parameters
    ----------
    f : GridFunction or callable
        A callable maps points of shape (P, d) to values; it is sampled on
        ``quad`` (default rule if omitted) and on the doubled rule, and
        ``under_resolved`` is set when any coefficient moves by more than
        ``tol``.
    """
    return _transform(f, system, indices, quad, system.v, "L", tol)


def adjoint_transform(f, system, indices, quad=None, tol=1e-10):
    """``f_hat_*(xi) = sum_nodes w f conj(u_xi)``; see :func:`forward_transform`."""
    return _transform(f, system, indices, quad, system.u, "Lstar", tol)


def inverse_transform(coeffs, x):
    """``sum_xi c(xi) u_xi(x)`` (``v_xi`` for the starred kind).

    A single point gives a complex number; an array of points gives an array.
    """
    system = coeffs.system
    pts = _as_points(x, system.dimension)
    if not coeffs.indices:
        out = np.zeros(pts.shape[0], dtype=complex)
    else:
        basis = system.u if coeffs.kind == "L" else system.v
        out = coeffs.values @ basis(list(coeffs.indices), pts)
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and system.dimension > 1
                                 and np.shape(x)[0] == system.dimension)
    return complex(out[0]) if single else out


def _check_pair(a, b, kinds):
    if a.system is not b.system:
        raise PreconditionError("coefficient sets belong to different systems")
    if a.indices != b.indices:
        raise PreconditionError("coefficient sets use different index sets")
    if (a.kind, b.kind) != kinds:
        raise PreconditionError(f"expected kinds {kinds}, got {(a.kind, b.kind)}")


def parseval(fhat, ghat):
    """``sum_xi f_hat(xi) conj(g_hat(xi))`` for two L-transforms.

    This equals ``(f, g)`` only on orthonormal systems; use
    :func:`parseval_mixed` in general.
    """
    _check_pair(fhat, ghat, ("L", "L"))
    return complex(np.sum(fhat.values * ghat.values.conj()))


def parseval_mixed(fhat, ghat_star):
    """``sum_xi f_hat(xi) conj(g_hat_*(xi))`` which equals ``(f, g)`` for
    band-limited inputs on any biorthogonal system."""
    _check_pair(fhat, ghat_star, ("L", "Lstar"))
    return complex(np.sum(fhat.values * ghat_star.values.conj()))


def lp_norm(coeffs, p, system=None, per_dim=1024, sups=None):
    """Weighted ``l^p`` norm ``(sum |a|^p ||w_xi||_inf^{2-p})^{1/p}``.

    For L-coefficients ``w = u`` when ``p <= 2`` and ``w = v`` when ``p > 2``;
    the roles swap for starred coefficients. Sup norms are grid estimates
    (``per_dim`` points per dimension plus one refinement), or may be passed
    via ``sups``.
    """
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"p must satisfy 1 <= p < inf, got {p}")
    system = coeffs.system if system is None else system
    a = np.abs(coeffs.values)
    if p == 2 or not coeffs.indices:
        return float(np.sum(a ** 2)) ** 0.5
    if sups is None:
        use_u = (p <= 2) == (coeffs.kind == "L")
        sups = sup_norms(system, list(coeffs.indices), "u" if use_u else "v", per_dim=per_dim)
    return float(np.sum(a ** p * np.asarray(sups) ** (2.0 - p))) ** (1.0 / p)


def sobolev_norm(fhat, fhat_star, s, rtol=1e-8):
    """``sqrt(Re sum <xi>^{2s} f_hat conj(f_hat_*))`` over the truncation.

    Raises NumericalFailure when the real part is negative beyond tolerance;
    warns with SobolevConsistencyWarning when the imaginary part exceeds
    ``rtol`` times the real part.
    """
    _check_pair(fhat, fhat_star, ("L", "Lstar"))
    if not fhat.indices:
        return 0.0
    w = fhat.system.bracket(list(fhat.indices)) ** (2.0 * s)
    total = complex(np.sum(w * fhat.values * fhat_star.values.conj()))
    scale = float(np.sum(w * np.abs(fhat.values * fhat_star.values)))
    if total.real < -rtol * max(scale, 1e-300):
        raise NumericalFailure(
            f"Sobolev pairing has negative real part {total.real:.3e} at s={s}")
    if abs(total.imag) > rtol * max(abs(total.real), 1e-300) and abs(total.imag) > 1e-300:
        warnings.warn(f"Sobolev pairing imaginary part {total.imag:.3e} exceeds tolerance",
                      SobolevConsistencyWarning, stacklevel=2)
    return math.sqrt(max(total.real, 0.0))
