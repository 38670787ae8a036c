import math

import numpy as np
import pytest

from dropflow.field import equilibrium_radius
from dropflow.radial import FixedMultiplier, VolumePreserving, radial_energy_rate, radial_ode
from dropflow.velocity import VelocityLaw


def test_volume_preserving_relaxes_monotonically():
    rs = equilibrium_radius(1.0)
    sol = radial_ode(1.3 * rs, VelocityLaw.power(2), VolumePreserving(1.0), 10.0, 0.01)
    assert abs(sol.r[-1] - rs) <= 1e-3
    assert np.all(np.diff(sol.r) <= 1e-15)
    assert sol.event.kind == "equilibrium"


def test_growth_from_below():
    rs = equilibrium_radius(1.0)
    sol = radial_ode(0.8 * rs, VelocityLaw.power(2), VolumePreserving(1.0), 10.0, 0.01)
    assert abs(sol.r[-1] - rs) <= 1e-3 and np.all(np.diff(sol.r) >= -1e-15)


def test_fixed_multiplier_blowup():
    # r' = 4 r^2 - 1, r(0) = 1 blows up at ln(3)/4
    sol = radial_ode(1.0, VelocityLaw.power(2), FixedMultiplier(2.0, N=1), 1.0, 1e-3)
    assert sol.event.kind == "blowup"
    t0, t1 = sol.event.bracket
    assert t1 < 1 / 3
    assert t0 == pytest.approx(math.log(3) / 4, abs=1e-3)


def test_fixed_multiplier_extinction():
    # F(s) = s - 1 with s = 0.5 r: r' = r/2 - 1 vanishes at t = 2 ln 2
    sol = radial_ode(1.0, VelocityLaw.power(1), FixedMultiplier(1.0, N=2), 5.0, 1e-3)
    assert sol.event.kind == "extinction"
    assert sol.event.bracket[1] < 2.0
    assert sol.event.bracket[0] == pytest.approx(2 * math.log(2), abs=1e-6)


def test_rk4_order():
    law, mode = VelocityLaw.power(1), FixedMultiplier(1.0, N=2)
    exact = 2 - math.exp(0.5)  # r' = r/2 - 1, r(0) = 1 at t = 1
    errs = [abs(radial_ode(1.0, law, mode, 1.0, dt).r[-1] - exact) for dt in (0.1, 0.05)]
    assert errs[0] / errs[1] > 12


def test_energy_rate():
    assert radial_energy_rate(1.2, 1.0) == pytest.approx(-1.5753, abs=5e-4)
    assert radial_energy_rate(equilibrium_radius(1.0), 1.0) == pytest.approx(0.0, abs=1e-12)


def test_invalid():
    with pytest.raises(ValueError):
        radial_ode(-1.0, VelocityLaw.power(2), VolumePreserving(1.0), 1.0, 0.1)
