import numpy as np
import pytest
import mpmath

from nhspec import matrix as mx, spectrum as sp
from nhspec.quantize import Symbol

from conftest import SYSTEMS

T1 = SYSTEMS["torus1"]


def charpoly_roots(a, dps=50):
    """Oracle: Faddeev-LeVerrier coefficients in high precision, roots by mpmath."""
    with mpmath.workdps(dps):
        n = a.shape[0]
        A = mpmath.matrix([[mpmath.mpc(complex(z)) for z in row] for row in a])
        M = mpmath.zeros(n, n)
        coeffs = [mpmath.mpf(1)]
        I = mpmath.eye(n)
        for k in range(1, n + 1):
            M = A * M + coeffs[-1] * I
            AM = A * M
            c = -sum(AM[i, i] for i in range(n)) / k
            coeffs.append(c)
        roots = mpmath.polyroots(coeffs, maxsteps=500, extraprec=200)
        return np.array([complex(r) for r in roots])


def _match(a, b):
    a = np.sort_complex(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    err = 0.0
    for z in a:
        j = int(np.argmin([abs(z - w) for w in b]))
        err = max(err, abs(z - b.pop(j)))
    return err


def mathieu(n=41):
    return mx.build_matrix(Symbol.separable(T1, "xi1^2", "cos(x1)"), n)


def test_disc_mathieu():
    m = mathieu(41)
    discs = sp.gershgorin_discs(m)
    for d in discs:
        k = d.index[0]
        assert abs(d.center - k ** 2) < 1e-10
        want = 0.5 if abs(k) == 20 else 1.0
        assert d.radius == pytest.approx(want, abs=1e-9)
        assert d.radius_truncated


def test_disc_identity():
    discs = sp.gershgorin_discs(mx.build_matrix(Symbol.constant(T1, 1), 9))
    assert all(abs(d.center - 1) < 1e-12 and d.radius < 1e-12 for d in discs)


def test_disc_ionkin_centers():
    s = SYSTEMS["ionkin"]
    m = mx.build_matrix(Symbol.separable(s, "xi1", "x1^2"), 9)
    discs = sp.gershgorin_discs(m)
    from nhspec.transform import default_quadrature
    q = default_quadrature(s, m.order, extra_periods=2)
    for d in discs:
        k = d.index
        want = k[0] + np.sum(q.weights * q.nodes[:, 0] ** 2 * s.u([k], q.nodes)[0]
                             * np.conj(s.v([k], q.nodes)[0]))
        assert abs(d.center - want) < 1e-10


def test_wider_tail_delta():
    m, w = mathieu(21), mathieu(43)
    discs = sp.gershgorin_discs(m, wider=w)
    tails = {d.index[0]: d.tail_delta for d in discs}
    assert tails[10] == pytest.approx(0.5, abs=1e-10)
    assert tails[0] == pytest.approx(0.0, abs=1e-10)


def test_eigen_small_examples():
    r = sp.truncated_eigenvalues(np.diag([0, 1, 1, 4, 4]).astype(float))
    assert np.allclose(r.values, [0, 1, 1, 4, 4])
    r = sp.truncated_eigenvalues(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(r.values, [1, 3])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_eigen_against_characteristic_polynomial(n, rng):
    for _ in range(10):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        got = sp.truncated_eigenvalues(a).values
        assert _match(got, charpoly_roots(a)) < 1e-10


@pytest.mark.parametrize("n", [3, 5])
def test_mathieu_sections_against_charpoly(n):
    m = mathieu(41)
    got = sp.truncated_eigenvalues(m, n).values
    assert _match(got, charpoly_roots(m.section(n))) < 1e-10


def test_mathieu_eigenvalues_real_and_accurate():
    r = sp.truncated_eigenvalues(mathieu(41))
    assert r.values.size == 41
    assert np.max(np.abs(r.values.imag)) < 1e-8
    assert np.max(r.residuals) < 1e-8


def test_residuals_random(rng):
    a = rng.standard_normal((256, 256))
    r = sp.truncated_eigenvalues(a)
    assert np.max(r.residuals) < 1e-8 * max(1.0, np.abs(a).max() * 16)


def test_containment_examples():
    d = np.diag([1.0, 5.0, 9.0])
    c = sp.containment_check(sp.gershgorin_discs(d), sp.truncated_eigenvalues(d).values)
    assert c.all_inside and max(c.distances) == 0
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    c = sp.containment_check(sp.gershgorin_discs(a), sp.truncated_eigenvalues(a).values)
    assert c.all_inside and c.max_violation == 0.0


def test_containment_mathieu():
    m = mathieu(41)
    c = sp.containment_check(sp.gershgorin_discs(m), sp.truncated_eigenvalues(m).values)
    assert c.all_inside and c.max_violation == 0.0


def test_containment_random_matrices(rng):
    for n in (3, 10, 40):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        c = sp.containment_check(sp.gershgorin_discs(a), sp.truncated_eigenvalues(a).values)
        assert c.all_inside


def test_components_mathieu():
    m = mathieu(41)
    comps = sp.component_multiplicity(sp.gershgorin_discs(m), sp.truncated_eigenvalues(m).values)
    assert all(c.matches for c in comps)
    order = m.order
    outer = [c for c in comps if min(abs(order[i][0]) for i in c.discs) >= 2]
    assert len(outer) == 19
    assert all(c.disc_count == 2 and c.eig_count == 2 for c in outer)


def test_components_separated_and_constant():
    d = np.diag([0, 10, 20, 30.0])
    comps = sp.component_multiplicity(sp.gershgorin_discs(d), np.diag(d))
    assert [(c.disc_count, c.eig_count) for c in comps] == [(1, 1)] * 4
    m = mx.build_matrix(Symbol.constant(T1, 3.0), 7)
    comps = sp.component_multiplicity(sp.gershgorin_discs(m), sp.truncated_eigenvalues(m).values)
    assert len(comps) == 1 and comps[0].disc_count == 7 and comps[0].eig_count == 7


def test_invertibility_examples():
    m = mx.build_matrix(Symbol.general(T1, "bracket^2 + 0.1*cos(x1)"), 41)
    v = sp.invertibility_check(m)
    assert v.verdict == "satisfied"
    assert v.a1 <= 0.1 + 1e-9 and v.a2 <= 0.1 + 1e-9
    assert v.inf_diag == pytest.approx(1.0, abs=1e-10)
    assert v.compact_inverse
    _, res = sp.section_solve(m)
    assert res < 1e-10
    z = sp.invertibility_check(mx.build_matrix(Symbol.constant(T1, 0.0), 5))
    assert z.verdict == "not-satisfied" and z.witness == (0,)
    tri = 2 * np.eye(9) + np.eye(9, k=1) + np.eye(9, k=-1)
    t = sp.invertibility_check(tri)
    assert t.a1 == pytest.approx(1.0) and t.verdict == "not-satisfied"


def test_invertibility_noise_diagonal_counts_as_zero():
    v = sp.invertibility_check(mathieu(21))
    assert v.verdict == "not-satisfied" and v.witness == (0,)


def test_resolvent_examples():
    sym = Symbol.separable(T1, "xi1^2", "cos(x1)")
    assert sp.resolvent_membership(sym, -10, 41).verdict == "satisfied"
    v = sp.resolvent_membership(Symbol.multiplier(T1, "xi1^2"), 4, 11)
    assert v.verdict == "not-satisfied" and abs(v.witness[0]) == 2
    assert sp.resolvent_membership(Symbol.constant(T1, 1), 0, 9).verdict == "satisfied"


def test_shift_consistency():
    sym = Symbol.general(T1, "xi1^2 + sin(x1) + 0.3*cos(2*x1)")
    lam = 2.5 - 1j
    d0 = sp.gershgorin_discs(mx.build_matrix(sym, 15))
    d1 = sp.gershgorin_discs(mx.build_matrix(sym.shifted(lam), 15))
    for a, b in zip(d0, d1):
        assert abs((a.center - lam) - b.center) < 1e-12
        assert abs(a.radius - b.radius) < 1e-12


def test_satisfied_implies_solvable(rng):
    for expr in ("bracket^2 + 0.3*sin(x1)", "5 + cos(x1)", "xi1^2 + 2 + 0.4*cos(x1)"):
        m = mx.build_matrix(Symbol.general(T1, expr), 31)
        if sp.invertibility_check(m).verdict == "satisfied":
            b = rng.standard_normal(31)
            _, res = sp.section_solve(m, b)
            assert res < 1e-10


def test_report_serialization():
    rep = sp.spectrum_report(mathieu(11))
    d = rep.to_dict()
    assert len(d["discs"]) == 11 and len(d["eigenvalues"]) == 11
    assert {"index", "center", "radius", "truncated"} <= set(d["discs"][0])
    assert {"inf_diag", "a1", "a2", "verdict"} <= set(d["invertibility"])
    assert {"disc_count", "eig_count"} <= set(d["components"][0])
    assert rep.eigen_csv().splitlines()[0] == "re,im,nearest_disc,distance"
