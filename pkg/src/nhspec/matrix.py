"""Finite sections of the associated matrix ``M[g, x] = (T_sigma u_x, v_g)``.

Includes Crone finite-section norms, the Riesz-constant boundedness sandwich
and the diagonal/off-diagonal split with its contraction quantities.
"""

import dataclasses

import numpy as np

from .errors import NumericalFailure, PreconditionError
from .report import csv_text, fmt
from .transform import default_quadrature

__all__ = [
    "AssociatedMatrix",
    "CroneReport",
    "DFSplit",
    "build_matrix",
    "finite_section_norm",
    "crone_report",
    "df_split",
]


@dataclasses.dataclass(frozen=True, eq=False)
class AssociatedMatrix:
    """Dense N x N section; rows and columns share the labels ``order``.

    ``entries[g, x] = int sigma(., x) u_x conj(v_g) dmu``: column x is the
    image of ``u_x`` expressed in the biorthogonal coordinates.
    """

    order: tuple
    entries: np.ndarray
    symbol: object = None
    quad: object = None
    under_resolved: bool = False
    doubling_change: float = 0.0

    @property
    def size(self):
        return self.entries.shape[0]

    def section(self, n):
        """Leading n x n principal submatrix in enumeration order."""
        if not 1 <= n <= self.size:
            raise ValueError(f"section size must be in [1, {self.size}], got {n}")
        return self.entries[:n, :n]

    def position(self, xi):
        key = (int(xi),) if np.isscalar(xi) else tuple(int(c) for c in xi)
        return self.order.index(key)

    @classmethod
    def from_array(cls, entries, order=None):
        a = np.asarray(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("associated matrix must be square")
        order = tuple((i,) for i in range(a.shape[0])) if order is None else tuple(order)
        return cls(order=order, entries=a)

    def to_csv(self):
        l = len(self.order[0]) if self.order else 1
        head = [f"row_xi{j + 1}" for j in range(l)] + [f"col_xi{j + 1}" for j in range(l)] + ["re", "im"]
        rows = []
        for i, g in enumerate(self.order):
            for j, x in enumerate(self.order):
                z = self.entries[i, j]
                rows.append(list(g) + list(x) + [fmt(z.real), fmt(z.imag)])
        return csv_text(head, rows)

    def to_dict(self):
        return {"order": [list(k) for k in self.order], "size": self.size,
                "entries": [[complex(z) for z in row] for row in self.entries],
                "under_resolved": self.under_resolved}


def _assemble(symbol, indices, rule):
    system = symbol.system
    u = system.u(indices, rule.nodes)
    v = system.v(indices, rule.nodes)
    s = symbol.values(rule.nodes, indices)
    return v.conj() @ (rule.weights[None, :] * s * u).T


def build_matrix(symbol, n, quad=None, check_resolution=True, tol=1e-10):
    """Assemble the n-section of the associated matrix by quadrature.

    The default rule resolves frequency sums up to twice the highest
    enumerated frequency plus the symbol's own x-oscillation. With
    ``check_resolution`` the assembly is repeated on the doubled rule and
    ``under_resolved`` is set when any entry moves by more than ``tol``
    (relative to the largest entry when that exceeds 1).
    """
    system = symbol.system
    indices = system.enumerate(int(n))
    if quad is None:
        quad = default_quadrature(system, indices, extra_periods=symbol.x_periods)
    m = _assemble(symbol, indices, quad)
    change, flag = 0.0, False
    if check_resolution:
        m2 = _assemble(symbol, indices, quad.doubled())
        change = float(np.max(np.abs(m - m2)))
        flag = change > tol * max(1.0, float(np.max(np.abs(m))))
    return AssociatedMatrix(order=tuple(indices), entries=m, symbol=symbol, quad=quad,
                            under_resolved=flag, doubling_change=change)


def _entries(m):
    return m.entries if isinstance(m, AssociatedMatrix) else np.asarray(m, dtype=complex)


def finite_section_norm(m, n):
    """Largest singular value of the leading n x n section."""
    a = _entries(m)
    if not 1 <= n <= a.shape[0]:
        raise ValueError(f"n must be in [1, {a.shape[0]}], got {n}")
    return float(np.linalg.norm(a[:n, :n], 2))


@dataclasses.dataclass(frozen=True)
class CroneReport:
    """Section norms of M and of M^H M; final values are operator-norm lower bounds.

    With Riesz estimates, ``sandwich`` gives
    ``(k1/K1)^2 sup_n ||P_n M^H M P_n|| <= ||T||^2 <= (K1/k1)^2 sup_n ||P_n M^H M P_n||``.
    """

    sizes: tuple
    norms: tuple
    gram_norms: tuple
    monotone: bool
    gram_monotone: bool
    lower_bound: float
    sandwich: tuple = None

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["note"] = "section norms are lower bounds for the untruncated operator"
        return out


def crone_report(m, sizes=None, riesz=None, rtol=1e-10):
    """Finite-section norm sequences of M and of M^H M.

    Both sequences must be nondecreasing; a drop beyond ``rtol`` times the
    largest value can only come from a software fault and raises
    NumericalFailure.
    """
    a = _entries(m)
    n = a.shape[0]
    sizes = tuple(range(1, n + 1)) if sizes is None else tuple(int(s) for s in sizes)
    norms, gnorms = [], []
    for s in sizes:
        sec = a[:s, :s]
        norms.append(float(np.linalg.norm(sec, 2)))
        # n-section of M^H M built from the full available columns
        g = a[:, :s].conj().T @ a[:, :s]
        gnorms.append(float(np.linalg.norm(g, 2)))
    scale = max(max(norms), max(gnorms), 1e-300)
    mono = bool(np.all(np.diff(norms) >= -rtol * scale))
    gmono = bool(np.all(np.diff(gnorms) >= -rtol * scale))
    if not (mono and gmono):
        raise NumericalFailure("finite-section norms decreased: compression monotonicity violated")
    sandwich = None
    if riesz is not None:
        k1, K1 = riesz[0], riesz[1]
        sandwich = ((k1 / K1) ** 2 * gnorms[-1], (K1 / k1) ** 2 * gnorms[-1])
    return CroneReport(sizes=sizes, norms=tuple(norms), gram_norms=tuple(gnorms),
                       monotone=mono, gram_monotone=gmono, lower_bound=norms[-1],
                       sandwich=sandwich)


@dataclasses.dataclass(frozen=True, eq=False)
class DFSplit:
    """``M = D + F`` with D diagonal.

    ``a1 = max_x sum_{z != x} |M[x, z]| / |M[x, x]|`` (row sums against the
    row's own diagonal) and ``a2 = max_x sum_{z != x} |M[z, x]| / |M[x, x]|``
    (column sums). ``norm_inf`` and ``norm_1`` are the exact l^inf and l^1
    operator norms of ``F D^{-1}``; their geometric mean bounds its l^2 norm.
    """

    D: np.ndarray
    F: np.ndarray
    a1: float
    a2: float
    norm_inf: float
    norm_1: float
    min_abs_diag: float
    contraction_bound: float
    contraction: bool

    def to_dict(self):
        return {"a1": self.a1, "a2": self.a2, "norm_inf_FDinv": self.norm_inf,
                "norm_1_FDinv": self.norm_1, "min_abs_diag": self.min_abs_diag,
                "contraction_bound": self.contraction_bound, "contraction": self.contraction}


def df_split(m, order=None, atol=0.0):
    """Split off the diagonal and compute the contraction quantities.

    Raises PreconditionError naming the first index with ``|M[x, x]| <= atol``.
    """
    a = _entries(m)
    labels = m.order if isinstance(m, AssociatedMatrix) else order
    diag = np.diag(a).copy()
    mag = np.abs(diag)
    bad = np.flatnonzero(mag <= atol)
    if bad.size:
        k = int(bad[0])
        lab = labels[k] if labels is not None else k
        raise PreconditionError(f"diagonal entry at index {lab} is zero; the split needs nonzero diagonal")
    D = np.diag(diag)
    F = a - D
    absF = np.abs(F)
    a1 = float(np.max(absF.sum(axis=1) / mag))
    a2 = float(np.max(absF.sum(axis=0) / mag))
    FD = absF / mag[None, :]
    n_inf = float(np.max(FD.sum(axis=1)))
    n_1 = float(np.max(FD.sum(axis=0)))
    bound = float(np.sqrt(n_inf * n_1))
    return DFSplit(D=D, F=F, a1=a1, a2=a2, norm_inf=n_inf, norm_1=n_1,
                   min_abs_diag=float(mag.min()), contraction_bound=bound,
                   contraction=bound < 1.0)
