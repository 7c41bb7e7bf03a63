import math
import warnings

import numpy as np
import pytest

from nhspec import basis, transform as tr
from nhspec.basis import DomainSpec
from nhspec.errors import ConstructionError, NumericalFailure, PreconditionError

from conftest import SYSTEMS, interior_points


def _dom(*box):
    return DomainSpec(tuple(box))


def test_quadrature_weights_sum():
    q = tr.build_quadrature(_dom((0.0, 2 * math.pi)), 4)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_quadrature_polynomial():
    q = tr.build_quadrature(_dom((0.0, 1.0)), 8)
    assert q.integrate(q.nodes[:, 0]) == pytest.approx(0.5, abs=1e-14)


def test_quadrature_oscillatory_zero():
    q = tr.build_quadrature(_dom((0.0, 2 * math.pi)), 64)
    val = q.integrate(np.exp(5j * q.nodes[:, 0]))
    oracle = q.doubled().integrate(np.exp(5j * q.doubled().nodes[:, 0]))
    assert abs(val) < 1e-12
    assert abs(val - oracle) < 1e-12


def test_quadrature_nodes_interior(system):
    q = tr.default_quadrature(system, system.enumerate(8))
    for j, (lo, hi) in enumerate(system.domain.box):
        assert np.all(q.nodes[:, j] > lo) and np.all(q.nodes[:, j] < hi)


def test_quadrature_order_check():
    with pytest.raises(ConstructionError):
        tr.build_quadrature(_dom((0.0, 1.0)), 1)


def _delta_check(fhat, target, tol):
    for k, z in zip(fhat.indices, fhat.values):
        want = 1.0 if k == target else 0.0
        assert abs(z - want) < tol, (k, z)


def test_forward_torus_mode():
    s = SYSTEMS["torus1"]
    fhat = tr.forward_transform(lambda p: np.exp(3j * p[:, 0]), s, s.enumerate(15))
    _delta_check(fhat, (3,), 1e-12)
    assert fhat.kind == "L"


def test_forward_ionkin_u5():
    s = SYSTEMS["ionkin"]
    fhat = tr.forward_transform(lambda p: s.u([(5,)], p)[0], s, s.enumerate(16))
    _delta_check(fhat, (5,), 1e-8)


def test_forward_twisted_cos():
    s = SYSTEMS["h_twisted1"]
    fhat = tr.forward_transform(lambda p: 2.0 ** (p[:, 0] / (2 * math.pi)) * np.cos(p[:, 0]),
                                s, s.enumerate(11))
    for k, z in zip(fhat.indices, fhat.values):
        want = 0.5 if k in ((1,), (-1,)) else 0.0
        assert abs(z - want) < 1e-12


def test_adjoint_examples():
    s = SYSTEMS["torus1"]
    fs = tr.adjoint_transform(lambda p: np.exp(3j * p[:, 0]), s, s.enumerate(15))
    _delta_check(fs, (3,), 1e-12)
    assert fs.kind == "Lstar"
    s = SYSTEMS["ionkin"]
    fs = tr.adjoint_transform(lambda p: s.v([(3,)], p)[0], s, s.enumerate(16))
    _delta_check(fs, (3,), 1e-8)
    s = SYSTEMS["h_twisted1"]
    fs = tr.adjoint_transform(lambda p: s.v([(2,)], p)[0], s, s.enumerate(11))
    assert fs[(2,)] == pytest.approx(1.0, abs=1e-10)


def test_inverse_examples():
    s = SYSTEMS["torus1"]
    c = tr.SpectralCoefficients.from_mapping(s, {3: 1.0}, "L", s.enumerate(9))
    assert tr.inverse_transform(c, [0.0]) == pytest.approx(1.0)
    s = SYSTEMS["ionkin"]
    c = tr.SpectralCoefficients.from_mapping(s, {0: 1.0}, "Lstar", s.enumerate(4))
    assert tr.inverse_transform(c, [0.25]) == pytest.approx(2.0)


def test_absent_index_is_zero():
    s = SYSTEMS["torus1"]
    c = tr.SpectralCoefficients.from_mapping(s, {1: 2.0}, "L", s.enumerate(5))
    assert c[(2,)] == 0
    assert c[40] == 0
    assert c[1] == 2.0


def _random_band_limited(s, n, rng, kind="L"):
    idx = s.enumerate(n)
    vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return tr.SpectralCoefficients(tuple(idx), vals, s, kind)


def test_round_trip_coefficients(system, rng):
    # forward o inverse is the identity on coefficients supported on the truncation
    c = _random_band_limited(system, 20, rng)
    out = tr.forward_transform(lambda p: tr.inverse_transform(c, p), system, c.indices)
    assert np.max(np.abs(out.values - c.values)) < 1e-8


def test_round_trip_nodes_trig_polynomial(rng):
    s = SYSTEMS["torus1"]
    idx = s.enumerate(17)  # degree <= 8
    cf = rng.standard_normal(17)

    def f(p):
        return sum(a * np.exp(1j * k[0] * p[:, 0]) for a, k in zip(cf, idx))

    q = tr.default_quadrature(s, idx)
    fhat = tr.forward_transform(tr.GridFunction.from_callable(f, q), s, idx)
    assert np.max(np.abs(tr.inverse_transform(fhat, q.nodes) - f(q.nodes))) < 1e-8


def test_doubling_invariant(system, rng):
    c = _random_band_limited(system, 12, rng)
    fhat = tr.forward_transform(lambda p: tr.inverse_transform(c, p), system, c.indices)
    assert fhat.doubling_change < 1e-10
    assert not fhat.under_resolved


def test_parseval_examples(rng):
    s = SYSTEMS["torus1"]
    f = lambda p: np.exp(1j * p[:, 0])  # noqa: E731
    fh = tr.forward_transform(f, s, s.enumerate(5))
    assert tr.parseval(fh, fh) == pytest.approx(1.0)
    c = _random_band_limited(s, 15, rng)
    g = tr.GridFunction.from_callable(lambda p: tr.inverse_transform(c, p),
                                      tr.default_quadrature(s, c.indices))
    gh = tr.forward_transform(g, s, c.indices)
    assert abs(tr.parseval(gh, gh) - g.l2_norm() ** 2) < 1e-8


def test_parseval_mixed_ionkin_u1():
    # ||u_1||^2 = int_0^1 sin^2(2 pi x) dx = 1/2
    s = SYSTEMS["ionkin"]
    f = lambda p: s.u([(1,)], p)[0]  # noqa: E731
    idx = s.enumerate(16)
    fh, fs = tr.forward_transform(f, s, idx), tr.adjoint_transform(f, s, idx)
    assert tr.parseval_mixed(fh, fs) == pytest.approx(0.5, abs=1e-8)


def test_parseval_mixed_real_nonnegative(system, rng):
    c = _random_band_limited(system, 16, rng)
    f = lambda p: tr.inverse_transform(c, p)  # noqa: E731
    q = tr.default_quadrature(system, c.indices)
    fh = tr.forward_transform(f, system, c.indices)
    fs = tr.adjoint_transform(f, system, c.indices)
    pm = tr.parseval_mixed(fh, fs)
    l2 = float(np.abs(f(q.nodes)) ** 2 @ q.weights)
    assert abs(pm.imag) < 1e-8 * l2
    assert pm.real > 0
    assert abs(pm.real - l2) / l2 < 1e-8


def test_parseval_kind_mismatch():
    s = SYSTEMS["torus1"]
    idx = s.enumerate(3)
    a = tr.SpectralCoefficients(tuple(idx), np.ones(3), s, "L")
    b = tr.SpectralCoefficients(tuple(idx), np.ones(3), s, "Lstar")
    with pytest.raises(PreconditionError):
        tr.parseval(a, b)
    with pytest.raises(PreconditionError):
        tr.parseval_mixed(a, a)
    c = tr.SpectralCoefficients(tuple(s.enumerate(4)), np.ones(4), s, "Lstar")
    with pytest.raises(PreconditionError):
        tr.parseval_mixed(a, c)


def test_lp_norm_examples():
    s = SYSTEMS["torus1"]
    c = tr.SpectralCoefficients.from_mapping(s, {0: 1.0, 1: 1.0}, "L", s.enumerate(3))
    assert tr.lp_norm(c, 1, s) == pytest.approx(2.0, rel=1e-12)
    s = SYSTEMS["ionkin"]
    c = tr.SpectralCoefficients.from_mapping(s, {0: 1.0}, "L", s.enumerate(3))
    assert tr.lp_norm(c, 1, s) == pytest.approx(1.0, rel=1e-9)


def test_lp_norm_p2_is_plain(system, rng):
    c = _random_band_limited(system, 10, rng)
    assert tr.lp_norm(c, 2) == pytest.approx(float(np.sum(np.abs(c.values) ** 2)) ** 0.5)


def test_lp_norm_errors():
    s = SYSTEMS["torus1"]
    c = tr.SpectralCoefficients.from_mapping(s, {0: 1.0}, "L", s.enumerate(3))
    with pytest.raises(ValueError):
        tr.lp_norm(c, 0.5)
    with pytest.raises(ValueError):
        tr.lp_norm(c, math.inf)


@pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
def test_lp_norm_monotone_in_truncation(p, rng):
    s = SYSTEMS["ionkin"]
    c = _random_band_limited(s, 24, rng)
    vals = []
    for n in (4, 8, 16, 24):
        sub = tr.SpectralCoefficients(c.indices[:n], c.values[:n], s, "L")
        vals.append(tr.lp_norm(sub, p, s, per_dim=256))
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_sobolev_examples():
    s = SYSTEMS["torus1"]
    f = lambda p: np.exp(1j * p[:, 0])  # noqa: E731
    idx = s.enumerate(5)
    fh, fs = tr.forward_transform(f, s, idx), tr.adjoint_transform(f, s, idx)
    assert tr.sobolev_norm(fh, fs, 1) == pytest.approx(2 ** 0.25, rel=1e-12)
    assert tr.sobolev_norm(fh, fs, 0) == pytest.approx(math.sqrt(tr.parseval_mixed(fh, fs).real))


@pytest.mark.parametrize("sval", [0.0, 1.0, 2.5])
def test_sobolev_ionkin_u1(sval):
    # f_hat = delta_1 and f_hat_*(1) = ||u_1||^2 = 1/2, so the norm is <1>^s / sqrt(2)
    s = SYSTEMS["ionkin"]
    f = lambda p: s.u([(1,)], p)[0]  # noqa: E731
    idx = s.enumerate(16)
    fh, fs = tr.forward_transform(f, s, idx), tr.adjoint_transform(f, s, idx)
    br = s.bracket([(1,)])[0]
    assert tr.sobolev_norm(fh, fs, sval) == pytest.approx(br ** sval / math.sqrt(2), rel=1e-8)


def test_sobolev_failure_and_warning():
    s = SYSTEMS["torus1"]
    idx = tuple(s.enumerate(3))
    a = tr.SpectralCoefficients(idx, np.array([1.0, 0, 0]), s, "L")
    neg = tr.SpectralCoefficients(idx, np.array([-1.0, 0, 0]), s, "Lstar")
    with pytest.raises(NumericalFailure):
        tr.sobolev_norm(a, neg, 0)
    tilted = tr.SpectralCoefficients(idx, np.array([1.0 + 1e-3j, 0, 0]), s, "Lstar")
    with pytest.warns(tr.SobolevConsistencyWarning):
        tr.sobolev_norm(a, tilted, 0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tr.sobolev_norm(a, tr.SpectralCoefficients(idx, np.array([1.0, 0, 0]), s, "Lstar"), 0)


def test_serialization():
    s = SYSTEMS["torus2"]
    c = tr.SpectralCoefficients.from_mapping(s, {(1, 0): 1 + 2j}, "L", s.enumerate(5))
    text = c.to_csv()
    assert text.splitlines()[0] == "xi1,xi2,re,im"
    assert "1,0,1.0,2.0" in text
    d = c.to_dict()
    assert {"system", "truncation", "kind", "entries"} <= set(d)
    q = tr.build_quadrature(s.domain, 3)
    g = tr.GridFunction.from_callable(lambda p: p[:, 0], q)
    assert g.to_csv().splitlines()[0] == "x1,x2,re,im"
    assert len(g.to_csv().splitlines()) == 10


def test_under_resolution_flag():
    s = SYSTEMS["torus1"]
    q = tr.build_quadrature(s.domain, 6)
    fhat = tr.forward_transform(lambda p: np.exp(1j * 9 * p[:, 0]), s, s.enumerate(5), quad=q)
    assert fhat.under_resolved


def test_inverse_vectorized(rng):
    s = SYSTEMS["torus1"]
    c = _random_band_limited(s, 5, rng)
    pts = interior_points(s, 4, rng)
    vals = tr.inverse_transform(c, pts)
    assert vals.shape == (4,)
