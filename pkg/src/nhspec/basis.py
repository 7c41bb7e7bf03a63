"""Biorthogonal eigensystems of model boundary value problems.

Every system carries index enumeration, vectorized evaluators for the
eigenfunctions ``u`` and their biorthogonal partners ``v`` (including first
and second derivatives of ``u``), eigenvalues and the frequency weight

    <xi> = (1 + |lambda_xi|^2)^(1/(2m)).

Indices are integer tuples. Evaluators take an index array of shape (N, l)
and points of shape (P, d) and return arrays of shape (N, P).
"""

import abc
import dataclasses
import math

import numpy as np

from ._quad import gauss_legendre_box
from ._sup import sup_abs
from .errors import ConstructionError, NumericalFailure

__all__ = [
    "DomainSpec",
    "EigenData",
    "BiorthogonalSystem",
    "BiorthogonalityCheck",
    "RieszEstimate",
    "enumerate_indices",
    "make_system",
    "make_torus",
    "make_h_twisted",
    "make_h_twisted_real",
    "make_neumann_rect",
    "make_ionkin",
    "make_moebius",
    "verify_biorthogonality",
    "normalization_deviation",
    "estimate_riesz_constants",
    "growth_check",
    "summability_check",
    "sup_norms",
    "gram_quadrature",
]

TWO_PI = 2.0 * math.pi


@dataclasses.dataclass(frozen=True)
class DomainSpec:
    """A box ``prod_j (lo_j, hi_j)`` with the measure ``dx / measure_normalizer``."""

    box: tuple
    dimension: int = dataclasses.field(init=False)
    measure_normalizer: float = dataclasses.field(init=False)

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if not box:
            raise ConstructionError("domain needs at least one interval")
        for lo, hi in box:
            if not (math.isfinite(lo) and math.isfinite(hi)) or not hi > lo:
                raise ConstructionError(f"invalid interval ({lo}, {hi})")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "dimension", len(box))
        object.__setattr__(
            self, "measure_normalizer", float(np.prod([hi - lo for lo, hi in box])))

    def contains(self, points):
        pts = np.atleast_2d(points)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return np.all((pts > lo) & (pts < hi), axis=1)


@dataclasses.dataclass(frozen=True)
class EigenData:
    lam: complex
    bracket: float
    order_m: int


def _as_points(points, d):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts[:, None] if d == 1 else pts[None, :]
    if pts.shape[-1] != d:
        raise ValueError(f"points must have {d} coordinates, got shape {pts.shape}")
    return pts


def _fmt_bracket(values):
    # ties are decided on 12 significant digits so that rounding noise in
    # |lambda| cannot reorder symmetric indices
    return np.array([float(f"{b:.12g}") for b in values])


class BiorthogonalSystem(abc.ABC):
    """Abstract biorthogonal system ``{u_xi}``, ``{v_xi}`` with ``(u_xi, v_eta) = delta``.

    Subclasses implement the family-specific evaluators. Instances are
    immutable apart from an internal enumeration cache.
    """

    name = "abstract"
    order_m = 2

    def __init__(self, domain, index_dim, params, growth, real_valued, periodic):
        self.domain = domain
        self.index_dim = int(index_dim)
        self.params = dict(params)
        self.growth = (float(growth[0]), float(growth[1]))
        self.real_valued = bool(real_valued)
        self.periodic = tuple(bool(p) for p in periodic)
        self.s0 = float(domain.dimension + 1)
        self._sorted = None
        self._sorted_limit = -np.inf
        self._radius = 0

    # ---- family hooks -------------------------------------------------
    @abc.abstractmethod
    def _u(self, idx, x, deriv):
        ...

    @abc.abstractmethod
    def _v(self, idx, x):
        ...

    @abc.abstractmethod
    def _lambda(self, idx):
        ...

    @abc.abstractmethod
    def _window(self, radius):
        """All admissible indices with sup-norm coordinates <= radius."""

    @abc.abstractmethod
    def _outside_bound(self, radius):
        """Lower bound of |lambda| over admissible indices outside the window."""

    @abc.abstractmethod
    def _periods(self, idx):
        """Number of oscillation periods of ``u_xi`` per coordinate, shape (N, d)."""

    def _admissible(self, idx):
        return np.ones(idx.shape[0], dtype=bool)

    # ---- public API ---------------------------------------------------
    @property
    def dimension(self):
        return self.domain.dimension

    def as_index_array(self, indices):
        arr = np.asarray(indices, dtype=np.int64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr[:, None] if self.index_dim == 1 else arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.index_dim:
            raise ValueError(
                f"{self.name} indices have {self.index_dim} coordinates; got shape {arr.shape}")
        if not np.all(self._admissible(arr)):
            bad = arr[~self._admissible(arr)][0]
            raise ValueError(f"index {tuple(int(c) for c in bad)} is not admissible for {self.name}")
        return arr

    def u(self, indices, points, deriv=0):
        """Evaluate ``u_xi`` (deriv 0), its gradient (1) or Hessian (2).

        Returns arrays of shape (N, P), (N, P, d) or (N, P, d, d).
        """
        if deriv not in (0, 1, 2):
            raise ValueError("deriv must be 0, 1 or 2")
        idx = self.as_index_array(indices)
        x = _as_points(points, self.dimension)
        return self._u(idx, x, deriv)

    def v(self, indices, points):
        idx = self.as_index_array(indices)
        x = _as_points(points, self.dimension)
        return self._v(idx, x)

    def u_eval(self, xi, x):
        return complex(self.u([xi] if self.index_dim > 1 else xi, x)[0, 0])

    def v_eval(self, xi, x):
        return complex(self.v([xi] if self.index_dim > 1 else xi, x)[0, 0])

    def eigenvalues(self, indices):
        return self._lambda(self.as_index_array(indices)).astype(complex)

    def bracket_from_lambda(self, lam):
        return (1.0 + np.abs(lam) ** 2) ** (1.0 / (2 * self.order_m))

    def bracket(self, indices):
        return self.bracket_from_lambda(self.eigenvalues(indices))

    def eigen(self, xi):
        idx = [xi] if self.index_dim > 1 else xi
        lam = complex(self.eigenvalues(idx)[0])
        return EigenData(lam=lam, bracket=float(self.bracket_from_lambda(lam)),
                         order_m=self.order_m)

    def periods(self, indices):
        return self._periods(self.as_index_array(indices))

    def _sorted_window(self, need_count=0, need_bracket=-np.inf):
        """Sorted index window valid for the first ``need_count`` indices and
        for all indices with bracket below ``need_bracket``.

        The window doubles until the excluded lattice points provably have
        larger brackets, so truncation is never silent.
        """
        while True:
            if self._sorted is not None:
                arr, limit = self._sorted, self._sorted_limit
                ok = need_bracket <= limit
                if need_count > 0:
                    ok = ok and arr.shape[0] >= need_count and (
                        self.bracket_from_lambda(self._lambda(arr[need_count - 1:need_count]))[0]
                        < limit)
                if ok:
                    return arr
            radius = 4 if self._sorted is None else 2 * self._radius
            cand = self._window(radius)
            cand = cand[self._admissible(cand)]
            brk = _fmt_bracket(self.bracket_from_lambda(self._lambda(cand)))
            keys = [cand[:, j] for j in range(cand.shape[1] - 1, -1, -1)] + [brk]
            order = np.lexsort(keys)
            self._sorted = cand[order]
            self._sorted_limit = float(self.bracket_from_lambda(self._outside_bound(radius)))
            self._radius = radius

    def enumerate(self, count):
        """First ``count`` indices ordered by (bracket, lexicographic coords)."""
        count = int(count)
        if count < 1:
            raise ValueError("count must be >= 1")
        arr = self._sorted_window(need_count=count)
        return [tuple(int(c) for c in row) for row in arr[:count]]

    def indices_below(self, bracket_max):
        """All indices with bracket strictly below ``bracket_max``, enumeration order."""
        arr = self._sorted_window(need_bracket=float(bracket_max))
        brk = self.bracket_from_lambda(self._lambda(arr))
        return [tuple(int(c) for c in row) for row in arr[brk < bracket_max]]

    def describe(self):
        return {
            "name": self.name,
            "params": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()},
            "dimension": self.dimension,
            "index_dim": self.index_dim,
            "order_m": self.order_m,
            "box": [list(b) for b in self.domain.box],
            "growth": {"C_b": self.growth[0], "mu0": self.growth[1]},
            "s0": self.s0,
            "real_valued": self.real_valued,
        }

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


def enumerate_indices(system, count):
    """First ``count`` indices of ``system`` in (bracket, lexicographic) order."""
    return system.enumerate(count)


# ---------------------------------------------------------------------------
# families

def _cube(radius, dim, lo=None):
    lo = [-radius] * dim if lo is None else lo
    axes = [np.arange(l, radius + 1) for l in lo]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1).astype(np.int64)


class ExponentialSystem(BiorthogonalSystem):
    """``u_xi = exp((c + i xi).x)``, ``v_xi = exp((-c + i xi).x)`` on (0, 2 pi)^d.

    ``c = ln(h) / (2 pi)``; the torus is the case ``h = 1``.
    """

    def __init__(self, d, h, name):
        h = np.asarray(h, dtype=float).reshape(-1)
        c = np.log(h) / TWO_PI
        self.name = name
        self.c = c
        params = {"d": d} if name == "torus" else {"d": d, "h": tuple(float(t) for t in h)}
        super().__init__(
            DomainSpec([(0.0, TWO_PI)] * d), d, params,
            growth=(float(np.prod(np.maximum(1.0, h))), 0.0),
            real_valued=False, periodic=[bool(cj == 0.0) for cj in c])

    def _rates(self, idx, sign=1.0):
        return sign * self.c[None, :] + 1j * idx

    def _u(self, idx, x, deriv):
        z = self._rates(idx)
        e = np.exp(x @ z.T).T
        if deriv == 0:
            return e
        if deriv == 1:
            return e[:, :, None] * z[:, None, :]
        return e[:, :, None, None] * (z[:, :, None] * z[:, None, :])[:, None, :, :]

    def _v(self, idx, x):
        return np.exp(x @ self._rates(idx, -1.0).T).T

    def _lambda(self, idx):
        return np.sum(self._rates(idx) ** 2, axis=1)

    def _window(self, radius):
        return _cube(radius, self.dimension)

    def _outside_bound(self, radius):
        return max(0.0, (radius + 1.0) ** 2 - float(np.sum(self.c ** 2)))

    def _periods(self, idx):
        return np.abs(idx).astype(float)


class RealTwistedSystem(BiorthogonalSystem):
    """Real twisted family ``A e^{c.x} cos(k.x + phi)`` with partners ``A e^{-c.x} cos(k.x + phi)``.

    An index whose first nonzero coordinate is positive selects the cosine
    ``k = xi``; a negative one selects the sine with ``k = -xi``; the zero
    index is the constant mode, with ``A = 1`` instead of ``sqrt 2``.
    """

    name = "h_twisted_real"

    def __init__(self, d, h):
        h = np.asarray(h, dtype=float).reshape(-1)
        self.c = np.log(h) / TWO_PI
        super().__init__(
            DomainSpec([(0.0, TWO_PI)] * d), d,
            {"d": d, "h": tuple(float(t) for t in h)},
            growth=(math.sqrt(2.0) * float(np.prod(np.maximum(1.0, h))), 0.0),
            real_valued=True, periodic=[bool(cj == 0.0) for cj in self.c])

    @staticmethod
    def _split(idx):
        nz = idx != 0
        first = np.where(nz.any(axis=1), nz.argmax(axis=1), 0)
        lead = idx[np.arange(idx.shape[0]), first]
        sign = np.sign(lead)
        k = np.where(sign[:, None] < 0, -idx, idx).astype(float)
        phi = np.where(sign < 0, -0.5 * math.pi, 0.0)
        amp = np.where(sign == 0, 1.0, math.sqrt(2.0))
        return k, phi, amp

    def _u(self, idx, x, deriv, csign=1.0):
        k, phi, amp = self._split(idx)
        c = csign * self.c
        g = amp[:, None] * np.exp(x @ c)[None, :]
        theta = (x @ k.T).T + phi[:, None]
        cs, sn = np.cos(theta), np.sin(theta)
        if deriv == 0:
            return g * cs
        if deriv == 1:
            return g[:, :, None] * (c[None, None, :] * cs[:, :, None]
                                    - k[:, None, :] * sn[:, :, None])
        cc = np.outer(c, c)[None, None]
        kk = (k[:, :, None] * k[:, None, :])[:, None]
        ck = (c[None, :, None] * k[:, None, :] + k[:, :, None] * c[None, None, :])[:, None]
        return g[:, :, None, None] * ((cc - kk) * cs[:, :, None, None]
                                      - ck * sn[:, :, None, None])

    def _v(self, idx, x):
        return self._u(idx, x, 0, csign=-1.0)

    def _lambda(self, idx):
        return -np.sum(idx.astype(float) ** 2, axis=1) - float(np.sum(self.c ** 2))

    def _window(self, radius):
        return _cube(radius, self.dimension)

    def _outside_bound(self, radius):
        return (radius + 1.0) ** 2 + float(np.sum(self.c ** 2))

    def _periods(self, idx):
        return np.abs(idx).astype(float)


class NeumannRectSystem(BiorthogonalSystem):
    """Neumann Laplacian modes ``c_n c_m cos(n x / a) cos(m y / b)`` on (0, 2 pi a) x (0, 2 pi b).

    ``c_0 = 1`` and ``c_k = sqrt 2`` give unit norm under the normalized measure.
    """

    name = "neumann_rect"

    def __init__(self, a, b):
        self.a, self.b = float(a), float(b)
        super().__init__(
            DomainSpec([(0.0, TWO_PI * self.a), (0.0, TWO_PI * self.b)]), 2,
            {"a": self.a, "b": self.b}, growth=(2.0, 0.0),
            real_valued=True, periodic=(False, False))

    def _admissible(self, idx):
        return np.all(idx >= 0, axis=1)

    def _freqs(self, idx):
        return idx[:, 0] / self.a, idx[:, 1] / self.b

    def _u(self, idx, x, deriv):
        p, q = self._freqs(idx)
        amp = np.where(idx[:, 0] > 0, math.sqrt(2.0), 1.0) * np.where(idx[:, 1] > 0, math.sqrt(2.0), 1.0)
        px = np.outer(p, x[:, 0])
        qy = np.outer(q, x[:, 1])
        cx, sx, cy, sy = np.cos(px), np.sin(px), np.cos(qy), np.sin(qy)
        a = amp[:, None]
        if deriv == 0:
            return a * cx * cy
        p_, q_ = p[:, None], q[:, None]
        if deriv == 1:
            return np.stack([-a * p_ * sx * cy, -a * q_ * cx * sy], axis=-1)
        hxx = -a * p_ ** 2 * cx * cy
        hxy = a * p_ * q_ * sx * sy
        hyy = -a * q_ ** 2 * cx * cy
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)

    def _v(self, idx, x):
        return self._u(idx, x, 0)

    def _lambda(self, idx):
        p, q = self._freqs(idx)
        return -(p ** 2 + q ** 2)

    def _window(self, radius):
        return _cube(radius, 2, lo=[0, 0])

    def _outside_bound(self, radius):
        return (radius + 1.0) ** 2 / max(self.a, self.b) ** 2

    def _periods(self, idx):
        return idx.astype(float)


class IonkinSystem(BiorthogonalSystem):
    """Non-self-adjoint interval basis on (0, 1).

    ``u_0 = x``, ``u_{2k-1} = sin(2 pi k x)``, ``u_{2k} = x cos(2 pi k x)``;
    ``v_0 = 2``, ``v_{2k-1} = 4 (1 - x) sin(2 pi k x)``, ``v_{2k} = 4 cos(2 pi k x)``.
    ``u_{2k}`` is an associated function sharing the eigenvalue ``(2 pi k)^2``.
    """

    name = "ionkin"

    def __init__(self):
        super().__init__(DomainSpec([(0.0, 1.0)]), 1, {}, growth=(1.0, 0.0),
                         real_valued=True, periodic=(False,))

    def _admissible(self, idx):
        return idx[:, 0] >= 0

    @staticmethod
    def _k(n):
        return (n + 1) // 2

    def _u(self, idx, x, deriv):
        n = idx[:, 0]
        w = TWO_PI * self._k(n).astype(float)
        t = x[:, 0][None, :]
        wt = w[:, None] * t
        s, c = np.sin(wt), np.cos(wt)
        zero = (n == 0)[:, None]
        odd = (n % 2 == 1)[:, None]
        w_ = w[:, None]
        if deriv == 0:
            out = np.where(odd, s, t * c)
            return np.where(zero, np.broadcast_to(t, out.shape), out)
        if deriv == 1:
            out = np.where(odd, w_ * c, c - w_ * t * s)
            out = np.where(zero, 1.0, out)
            return out[:, :, None]
        out = np.where(odd, -w_ ** 2 * s, -2.0 * w_ * s - w_ ** 2 * t * c)
        out = np.where(zero, 0.0, out)
        return out[:, :, None, None]

    def _v(self, idx, x):
        n = idx[:, 0]
        w = TWO_PI * self._k(n).astype(float)
        t = x[:, 0][None, :]
        wt = w[:, None] * t
        out = np.where((n % 2 == 1)[:, None], 4.0 * (1.0 - t) * np.sin(wt), 4.0 * np.cos(wt))
        return np.where((n == 0)[:, None], 2.0, out)

    def _lambda(self, idx):
        return (TWO_PI * self._k(idx[:, 0]).astype(float)) ** 2

    def _window(self, radius):
        return np.arange(0, radius + 1, dtype=np.int64)[:, None]

    def _outside_bound(self, radius):
        return float(self._lambda(np.array([[radius + 1]]))[0])

    def _periods(self, idx):
        return self._k(idx[:, 0]).astype(float)[:, None]


class MoebiusSystem(BiorthogonalSystem):
    """Dirichlet modes ``2 sin((2m+1) x / 2) sin(2 n y)`` on (-pi, pi) x (-pi/2, pi/2), m >= 0, n >= 1."""

    name = "moebius"

    def __init__(self):
        super().__init__(
            DomainSpec([(-math.pi, math.pi), (-0.5 * math.pi, 0.5 * math.pi)]), 2, {},
            growth=(2.0, 0.0), real_valued=True, periodic=(False, False))

    def _admissible(self, idx):
        return (idx[:, 0] >= 0) & (idx[:, 1] >= 1)

    @staticmethod
    def _freqs(idx):
        return (2.0 * idx[:, 0] + 1.0) / 2.0, 2.0 * idx[:, 1]

    def _u(self, idx, x, deriv):
        p, q = self._freqs(idx)
        px = np.outer(p, x[:, 0])
        qy = np.outer(q, x[:, 1])
        sx, cx, sy, cy = np.sin(px), np.cos(px), np.sin(qy), np.cos(qy)
        if deriv == 0:
            return 2.0 * sx * sy
        p_, q_ = p[:, None], q[:, None]
        if deriv == 1:
            return np.stack([2.0 * p_ * cx * sy, 2.0 * q_ * sx * cy], axis=-1)
        hxx = -2.0 * p_ ** 2 * sx * sy
        hxy = 2.0 * p_ * q_ * cx * cy
        hyy = -2.0 * q_ ** 2 * sx * sy
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)

    def _v(self, idx, x):
        return self._u(idx, x, 0)

    def _lambda(self, idx):
        p, q = self._freqs(idx)
        return -(p ** 2 + q ** 2)

    def _window(self, radius):
        cand = _cube(radius, 2, lo=[0, 1])
        return cand

    def _outside_bound(self, radius):
        return min(((2.0 * radius + 3.0) / 2.0) ** 2 + 4.0, 0.25 + 4.0 * (radius + 1.0) ** 2)

    def _periods(self, idx):
        p, q = self._freqs(idx)
        return np.stack([p / 2.0, q / 2.0], axis=-1)


def _check_dim(d):
    if int(d) != d or d < 1:
        raise ConstructionError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def _check_h(d, h):
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1:
        h = np.full(d, float(h[0]))
    if h.size != d:
        raise ConstructionError(f"h needs {d} entries, got {h.size}")
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ConstructionError(f"h entries must be finite and > 0, got {h.tolist()}")
    return h


def make_torus(d=1):
    """Periodic Laplacian on (0, 2 pi)^d: ``u = v = e^{i x.xi}``, ``lambda = -|xi|^2``."""
    d = _check_dim(d)
    return ExponentialSystem(d, np.ones(d), "torus")


def make_h_twisted(d=1, h=2.0):
    """Laplacian with twisted conditions ``f|_{x_j=0} = h_j f|_{x_j=2pi}``.

    ``u_xi = h^{x/2pi} e^{i x.xi}``, ``v_xi = h^{-x/2pi} e^{i x.xi}`` and
    ``lambda_xi = sum_j (ln h_j / 2pi + i xi_j)^2``.
    """
    d = _check_dim(d)
    return ExponentialSystem(d, _check_h(d, h), "h_twisted")


def make_h_twisted_real(d=1, h=2.0):
    """Real-valued analogue of the twisted family, ``lambda = -|xi|^2 - sum (ln h_j)^2 / 4pi^2``."""
    d = _check_dim(d)
    return RealTwistedSystem(d, _check_h(d, h))


def make_neumann_rect(a=1.0, b=1.0):
    a, b = float(a), float(b)
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise ConstructionError(f"a and b must be finite and > 0, got a={a}, b={b}")
    return NeumannRectSystem(a, b)


def make_ionkin():
    return IonkinSystem()


def make_moebius():
    return MoebiusSystem()


_FACTORIES = {
    "torus": (make_torus, {"d"}),
    "h_twisted": (make_h_twisted, {"d", "h"}),
    "h_twisted_real": (make_h_twisted_real, {"d", "h"}),
    "neumann_rect": (make_neumann_rect, {"a", "b"}),
    "ionkin": (make_ionkin, set()),
    "moebius": (make_moebius, set()),
}


def make_system(name, **params):
    """Build a system by name from a flat parameter table.

    ``h`` may be a number, a sequence, or a comma-separated string.
    """
    try:
        factory, allowed = _FACTORIES[name]
    except KeyError:
        raise ConstructionError(
            f"unknown basis {name!r}; choose from {sorted(_FACTORIES)}") from None
    extra = set(params) - allowed
    if extra:
        raise ConstructionError(f"basis {name!r} does not take parameters {sorted(extra)}")
    kw = {}
    for key, val in params.items():
        if key == "d":
            try:
                kw["d"] = int(val)
            except (TypeError, ValueError):
                raise ConstructionError(f"d must be an integer, got {val!r}") from None
        elif key == "h":
            if isinstance(val, str):
                try:
                    val = [float(t) for t in val.split(",")]
                except ValueError:
                    raise ConstructionError(f"h must be comma-separated reals, got {val!r}") from None
            kw["h"] = val
        else:
            try:
                kw[key] = float(val)
            except (TypeError, ValueError):
                raise ConstructionError(f"{key} must be a real number, got {val!r}") from None
    return factory(**kw)


# ---------------------------------------------------------------------------
# verification

def default_gram_order(system, indices, extra_periods=0.0):
    """Gauss-Legendre points per dimension for pairings of the given indices."""
    per = system.periods(indices)
    k = per.max(axis=0) if per.size else np.zeros(system.dimension)
    return tuple(int(4 * math.ceil(2 * kj + extra_periods) + 16) for kj in k)


def gram_quadrature(system, indices, quad, which="uv"):
    """Matrix ``G[a, b] = int w_a conj(z_b) dmu`` for ``which`` in {"uv", "uu", "vv"}."""
    left = system.u(indices, quad.nodes) if which[0] == "u" else system.v(indices, quad.nodes)
    right = system.v(indices, quad.nodes) if which[1] == "v" else system.u(indices, quad.nodes)
    return (left * quad.weights[None, :]) @ right.conj().T


@dataclasses.dataclass(frozen=True)
class BiorthogonalityCheck:
    deviation: float
    under_resolved: bool
    doubling_change: float
    count: int
    order: tuple

    def __float__(self):
        return self.deviation


def _rule_for(system, indices, quad):
    if quad is None:
        quad = gauss_legendre_box(system.domain.box, default_gram_order(system, indices))
    return quad


def verify_biorthogonality(system, count, quad=None, tol=1e-10):
    """Max deviation of ``int u_xi conj(v_eta) dmu`` from the identity.

    The rule is checked against its order-doubled version; ``under_resolved``
    is set when any pairing moves by more than ``tol``.
    """
    indices = system.enumerate(count)
    quad = _rule_for(system, indices, quad)
    g = gram_quadrature(system, indices, quad)
    g2 = gram_quadrature(system, indices, quad.doubled())
    change = float(np.max(np.abs(g - g2)))
    dev = float(np.max(np.abs(g - np.eye(len(indices)))))
    return BiorthogonalityCheck(deviation=dev, under_resolved=change > tol,
                                doubling_change=change, count=len(indices), order=quad.order)


def normalization_deviation(system, count, quad=None):
    """``(max |int |u|^2 - 1|, max |int |v|^2 - 1|)`` over the first ``count`` indices.

    Unit norms are a diagnostic: for families whose partners differ from the
    eigenfunctions (twisted, Ionkin) biorthogonality fixes the scale and the
    norms are not 1.
    """
    indices = system.enumerate(count)
    quad = _rule_for(system, indices, quad)
    u = system.u(indices, quad.nodes)
    v = system.v(indices, quad.nodes)
    nu = np.abs(u) ** 2 @ quad.weights
    nv = np.abs(v) ** 2 @ quad.weights
    return float(np.max(np.abs(nu - 1.0))), float(np.max(np.abs(nv - 1.0)))


@dataclasses.dataclass(frozen=True)
class RieszEstimate:
    """Square roots of the extreme eigenvalues of truncated Gram matrices.

    ``k1, K1`` come from the Gram matrix of ``{v_xi}`` and ``k2, K2`` from that
    of ``{u_xi}``. They bound the Riesz constants only for inputs inside the
    span of the truncation.
    """

    k1: float
    K1: float
    k2: float
    K2: float
    count: int
    certified_for: str = "band-limited inputs in the truncation span"

    def __iter__(self):
        return iter((self.k1, self.K1, self.k2, self.K2))

    def __getitem__(self, i):
        return (self.k1, self.K1, self.k2, self.K2)[i]


def estimate_riesz_constants(system, count, quad=None, rtol=1e-10):
    if count < 2:
        raise ValueError("count must be >= 2")
    indices = system.enumerate(count)
    quad = _rule_for(system, indices, quad)
    out = []
    for which in ("vv", "uu"):
        g = gram_quadrature(system, indices, quad, which)
        g = 0.5 * (g + g.conj().T)
        ev = np.linalg.eigvalsh(g)
        if ev[0] <= rtol * max(ev[-1], 1.0):
            raise NumericalFailure(
                f"{which[0]}-Gram matrix of {system.name} is not positive definite "
                f"(smallest eigenvalue {ev[0]:.3e})")
        out.extend([math.sqrt(ev[0]), math.sqrt(ev[-1])])
    return RieszEstimate(out[0], out[1], out[2], out[3], count)


def sup_norms(system, indices, which="u", per_dim=1024, refine=True):
    """Grid estimate of ``sup |u_xi|`` (or ``|v_xi|``) per index.

    Uses ``per_dim`` points per dimension (capped at 256 for d > 1) and one
    bounded local refinement around each grid maximizer.
    """
    per_dim = per_dim if system.dimension == 1 else min(per_dim, 256)
    idx = system.as_index_array(indices)
    ev = system.u if which == "u" else system.v

    def fun(points, rows):
        return ev(idx[rows], points)

    sups, _ = sup_abs(fun, idx.shape[0], system.domain.box, per_dim=per_dim, refine=refine)
    return sups


def growth_check(system, count, per_dim=256):
    """Max over the first ``count`` indices of ``sup|u_xi| / (C_b <xi>^mu0)``; <= 1 passes."""
    indices = system.enumerate(count)
    sups = sup_norms(system, indices, per_dim=per_dim, refine=False)
    cb, mu0 = system.growth
    ratio = sups / (cb * system.bracket(indices) ** mu0)
    return float(np.max(ratio))


def summability_check(system, counts=(64, 128, 256, 512)):
    """Partial sums of ``<xi>^{-s0}``; increments should shrink as the truncation doubles."""
    counts = sorted(int(c) for c in counts)
    brk = system.bracket(system.enumerate(counts[-1]))
    terms = brk ** (-system.s0)
    sums = [float(np.sum(terms[:c])) for c in counts]
    inc = np.diff(sums)
    increasing = bool(np.all(inc > 0))
    shrinking = bool(np.all(np.diff(inc) < 0)) if inc.size > 1 else True
    return {"counts": counts, "partial_sums": sums, "increasing": increasing,
            "bounded_evidence": increasing and shrinking}
