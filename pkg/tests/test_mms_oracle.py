"""Analytic manufactured forcings against a fourth-order finite-difference oracle."""
import numpy as np
import pytest

from oracle_mms import Oracle, mp
from eulerfsi.scenarios import MMS_FINAL_TIME, MMSCase, mms_params

TOL = 1e-8


def sample_points(seed, n=10):
    rng = np.random.default_rng(seed)
    return [(float(x), float(y), float(t)) for x, y, t in
            zip(rng.uniform(0, 1, n), rng.uniform(0, 1, n), rng.uniform(0, MMS_FINAL_TIME, n))]


@pytest.fixture(params=[(1, 0.2), (2, 0.05)], ids=["case1", "case2"])
def setup(request):
    case, eps = request.param
    prm = mms_params(case, eps)
    return MMSCase(case, prm), Oracle(prm)


def rel(a, b):
    return abs(a - float(b)) / max(1.0, abs(float(b)))


def test_phi_forcing(setup):
    mms, orc = setup
    for x, y, t in sample_points(1):
        ref = orc.forcing_phi(mp.mpf(x), mp.mpf(y), mp.mpf(t))
        assert rel(float(mms.forcing_phi(x, y, t)), ref) < TOL


def test_B_forcing(setup):
    mms, orc = setup
    for x, y, t in sample_points(2):
        ref = orc.forcing_B(mp.mpf(x), mp.mpf(y), mp.mpf(t))
        got = mms.forcing_B(x, y, t)
        for g, r in zip(got, ref):
            assert rel(float(g), r) < TOL


def test_momentum_forcing(setup):
    mms, orc = setup
    for x, y, t in sample_points(3):
        ref = orc.forcing_v(mp.mpf(x), mp.mpf(y), mp.mpf(t))
        got = mms.forcing_v(x, y, t)
        for g, r in zip(got, ref):
            assert rel(float(g), r) < TOL


def test_chemical_potential_matches_definition(setup):
    mms, orc = setup
    for x, y, t in sample_points(4, 5):
        assert rel(float(mms.m(x, y, t)), orc.m(mp.mpf(x), mp.mpf(y), mp.mpf(t))) < TOL


def test_reference_velocity_is_solenoidal():
    from oracle_mms import dx, dy

    for x, y, t in sample_points(5, 5):
        X, Y, T = mp.mpf(x), mp.mpf(y), mp.mpf(t)
        assert abs(dx(Oracle.vx)(X, Y, T) + dy(Oracle.vy)(X, Y, T)) < 1e-30


def test_reference_fields_vanish_at_start():
    mms = MMSCase(1, mms_params(1))
    x = np.linspace(0, 1, 7)
    assert np.all(mms.phi(x, x, 0.0) == 0.0)
    assert all(np.all(c == 0.0) for c in mms.B(x, x, 0.0))
