import numpy as np
import pytest

from nhspec import basis


def all_systems():
    """The built-in families with representative parameters."""
    return {
        "torus1": basis.make_torus(1),
        "torus2": basis.make_torus(2),
        "h_twisted1": basis.make_h_twisted(1, 2.0),
        "h_twisted2": basis.make_system("h_twisted", d=2, h="2,0.5"),
        "h_twisted_real1": basis.make_h_twisted_real(1, 3.0),
        "h_twisted_real2": basis.make_h_twisted_real(2, (2.0, 0.5)),
        "neumann_rect": basis.make_neumann_rect(1.0, 1.5),
        "ionkin": basis.make_ionkin(),
        "moebius": basis.make_moebius(),
    }


SYSTEMS = all_systems()


@pytest.fixture(params=sorted(SYSTEMS))
def system(request):
    return SYSTEMS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def interior_points(system, n, rng, margin=0.05):
    box = system.domain.box
    r = rng.random((n, system.dimension))
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * (margin + (1 - 2 * margin) * r)


# acceptance criterion outcomes, filled by test_acceptance and echoed at the end of the run
ACCEPTANCE = {}


def record(label, ok, detail):
    ACCEPTANCE[label] = (bool(ok), detail)
    print(f"{label} {'PASS' if ok else 'FAIL'}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s[2:])):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{label} {'PASS' if ok else 'FAIL'}: {detail}")
