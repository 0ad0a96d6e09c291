import numpy as np
import pytest

from eulerfsi.materials import MaterialParams, W, W_prime, W_prime_lin, W_second, clamp, gamma_from_physical
from eulerfsi.scenarios import mms_params

PRM = MaterialParams(rho_f=1.0, rho_s=10.0, mu_f=2.0, mu_s=0.5, g_f=0.1, g_s=7.0, alpha_f=3.0)


def test_fluid_and_solid_endpoints():
    assert (PRM.rho(1.0), PRM.mu(1.0), PRM.G(1.0), PRM.alpha(1.0)) == (1.0, 2.0, 0.1, 3.0)
    assert (PRM.rho(-1.0), PRM.mu(-1.0), PRM.G(-1.0), PRM.alpha(-1.0)) == (10.0, 0.5, 7.0, 0.0)


def test_midpoint_viscosity_of_first_mms_case():
    assert mms_params(1).mu(0.0) == pytest.approx(0.75)


def test_blends_clamp_overshoot():
    assert PRM.rho(1.3) == PRM.rho(1.0)
    assert PRM.G(-1.2) == PRM.G(-1.0)
    assert PRM.drho(1.3) == 0.0 and PRM.drho(0.2) == pytest.approx(-4.5)
    assert np.all(clamp(np.array([-2.0, 0.3, 5.0])) == [-1.0, 0.3, 1.0])


def test_double_well():
    for p in (-1.0, 1.0):
        assert W(p) == 0.0 and W_prime(p) == 0.0
    assert W_prime_lin(2.0, 0.5) == pytest.approx(1.5)
    for p in (-1.0, -0.3, 0.0, 0.7, 1.0):
        assert W_prime_lin(p, p) == pytest.approx(W_prime(p), abs=1e-15)
    h = 1e-6
    assert (W(0.3 + h) - W(0.3 - h)) / (2 * h) == pytest.approx(W_prime(0.3), rel=1e-8)
    assert W_second(0.3) == pytest.approx(3 * 0.09 - 1)


def test_gamma_scaling():
    assert gamma_from_physical(0.0) == 0.0
    assert gamma_from_physical(1.0) == pytest.approx(1.0606601717798212)
    assert gamma_from_physical(2 * np.sqrt(2) / 3) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gamma_from_physical(-1.0)


@pytest.mark.parametrize("field,value", [("rho_f", 0.0), ("rho_s", -1.0), ("mu_f", 0.0), ("mu_s", -0.1),
                                         ("g_s", 0.0), ("g_f", -1.0), ("alpha_f", -1.0), ("gamma", 0.0),
                                         ("epsilon", 0.0), ("mobility", 0.0), ("delta_stab", -1.0)])
def test_validation(field, value):
    with pytest.raises(ValueError, match=field):
        MaterialParams().replace(**{field: value})


def test_replace_rejects_unknown():
    with pytest.raises(KeyError):
        MaterialParams().replace(viscosity=1.0)
