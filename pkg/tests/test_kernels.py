import subprocess
import sys

import numpy as np
import pytest

from dropflow import _kernels as K


@pytest.fixture
def polyline():
    th = 2 * np.pi * np.arange(97) / 97
    r = 1 + 0.2 * np.cos(3 * th)
    return r * np.cos(th), r * np.sin(th)


def test_nearest_backends_agree(polyline, rng):
    vx, vy = polyline
    px, py = rng.uniform(-1.5, 1.5, (2, 500))
    d1, qx1, qy1 = K.nearest_on_polyline_np(px, py, vx, vy)
    d2, qx2, qy2 = K.nearest_on_polyline_nb(px, py, vx, vy)
    assert np.allclose(d1, d2, atol=1e-13)
    assert np.allclose(qx1, qx2, atol=1e-12) and np.allclose(qy1, qy2, atol=1e-12)


def test_nearest_distance_to_square():
    vx = np.array([1.0, -1.0, -1.0, 1.0])
    vy = np.array([1.0, 1.0, -1.0, -1.0])
    d, qx, qy = K.nearest_on_polyline_np(np.array([0.0, 2.0, 3.0]), np.array([0.0, 0.0, 3.0]), vx, vy)
    assert np.allclose(d, [1.0, 1.0, 2 * np.sqrt(2)])
    assert np.allclose([qx[1], qy[1]], [1.0, 0.0])


def test_reflection_excess_backends_agree(polyline):
    bx, by = polyline
    radii = 1 + 0.2 * np.cos(3 * 2 * np.pi * np.arange(64) / 64)
    ts = np.linspace(0.0, 1.1, 23)
    a = K.reflection_excess_np(bx, by, 0.6, 0.8, ts, radii)
    b = K.reflection_excess_nb(bx, by, 0.6, 0.8, ts, radii)
    assert np.allclose(a, b, atol=1e-12, equal_nan=True)


def test_radial_interp_scalar_matches_vector(rng):
    radii = rng.uniform(0.5, 1.5, 64)
    ang = rng.uniform(-10, 10, 50)
    vec = K.radial_interp_np(ang, radii)
    sca = np.array([K._radial_interp_scalar(a, radii) for a in ang])
    assert np.allclose(vec, sca, atol=1e-14)


def test_radial_interp_hits_samples(rng):
    radii = rng.uniform(0.5, 1.5, 64)
    ang = 2 * np.pi * np.arange(64) / 64
    assert np.allclose(K.radial_interp_np(ang, radii), radii)
    assert np.allclose(K.radial_interp_np(ang + 2 * np.pi, radii), radii)


def test_env_flag_selects_numpy_backend():
    code = "from dropflow import _kernels as K; print(K.backend())"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"DROPFLOW_DISABLE_NUMBA": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "numpy"
