import math

import numpy as np
import pytest

from resonant_spectra.dynamics import (ActionProfile, build_action_profile, detect_period,
                                       energy_point, integrate_flow)
from resonant_spectra.symbols import PolySymbol


def test_harmonic_period():
    p2 = PolySymbol.harmonic((1, 1))
    assert detect_period(p2, 1.0) == pytest.approx(2 * math.pi, rel=1e-10)
    assert detect_period(p2, 3.0) == pytest.approx(2 * math.pi, rel=1e-10)
    assert detect_period(PolySymbol.harmonic((2, 1)), 1.0) == pytest.approx(2 * math.pi, rel=1e-10)


def test_period_through_the_integrator():
    # a negligible quartic term sends the flow through DOP853
    p = PolySymbol.harmonic((1, 1), exact=False) + PolySymbol({(2, 0, 2, 0): 1e-30}, exact=False)
    assert detect_period(p, 1.0) == pytest.approx(2 * math.pi, rel=1e-8)


def test_energy_conservation(default_symbols):
    p2, q, _ = default_symbols
    h = p2 + q * PolySymbol.constant(0.1)
    start = energy_point(h, 1.0)
    traj = integrate_flow(h, start, 100.0)
    assert traj.energy_drift < 1e-8


def test_exact_rotation_returns():
    p2 = PolySymbol.harmonic((1, 1))
    start = energy_point(p2, 2.0)
    traj = integrate_flow(p2, start, 2 * math.pi, n_samples=5)
    assert np.allclose(traj.states[-1], start, atol=1e-13)
    assert p2(start) == pytest.approx(2.0)


def test_profile_inverse_nonconstant_period():
    prof = build_action_profile(lambda E: 2 * math.pi * (1 + E), (0.0, 2.0), E_ref=0.5)
    E = np.array([0.2, 0.9, 1.7])
    # g(E) = E + E^2/2 - (0.5 + 0.125)
    assert np.allclose(prof.g(E), E + E ** 2 / 2 - 0.625, atol=1e-12)
    assert np.allclose(prof.f(prof.g(E)), E, atol=1e-12)


def test_profile_constant_period_is_identity():
    prof = build_action_profile(2 * math.pi, (0.5, 1.5), E_ref=1.0)
    assert prof.f(0.25) == pytest.approx(1.25)
    with pytest.raises(ValueError):
        ActionProfile(lambda E: -1.0, (0, 1))
