import numpy as np
import pytest
from scipy import stats

from pixelps.geom import (angular_error, rotate_about_z,
                          sample_hemisphere_uniform)


def test_degenerate_cap_returns_pole():
    rng = np.random.default_rng(0)
    d = sample_hemisphere_uniform(rng, 1e-9)
    assert np.allclose(d, [0, 0, 1], atol=1e-4)


def test_cap_constraint():
    rng = np.random.default_rng(1)
    dirs = sample_hemisphere_uniform(rng, np.radians(70), size=200_000)
    assert np.all(dirs[:, 2] >= np.cos(np.radians(70)) - 1e-12)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)


def test_azimuth_uniform_chi2():
    # 1e6 samples, 36 azimuth bins; chi-square goodness of fit at p > 0.01
    rng = np.random.default_rng(2)
    dirs = sample_hemisphere_uniform(rng, np.radians(70), size=1_000_000)
    az = np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * np.pi)
    counts, _ = np.histogram(az, bins=36, range=(0, 2 * np.pi))
    expected = len(az) / 36
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < stats.chi2.ppf(0.99, df=35)


def test_z_uniform_on_cap():
    # solid-angle uniformity on the cap means z itself is uniform
    rng = np.random.default_rng(3)
    zmin = np.cos(np.radians(70))
    dirs = sample_hemisphere_uniform(rng, np.radians(70), size=500_000)
    u = (dirs[:, 2] - zmin) / (1 - zmin)
    d_stat = stats.kstest(u, "uniform").statistic
    assert d_stat < 0.005


def test_max_elevation_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_hemisphere_uniform(rng, 0.0)
    with pytest.raises(ValueError):
        sample_hemisphere_uniform(rng, np.pi / 2 + 0.1)


def test_rotate_quarter_turn():
    out = rotate_about_z(np.array([1.0, 0, 0]), np.pi / 2)
    assert np.allclose(out, [0, 1, 0], atol=1e-15)


def test_rotate_axis_fixed_point():
    for theta in (0.3, 1.0, -2.5):
        assert np.allclose(rotate_about_z(np.array([0.0, 0, 1]), theta), [0, 0, 1])


def test_rotate_inverse_and_norm():
    rng = np.random.default_rng(4)
    d = sample_hemisphere_uniform(rng, np.pi / 2, size=100)
    for theta in (0.1, 1.7, 3.0):
        back = rotate_about_z(rotate_about_z(d, theta), -theta)
        assert np.max(np.abs(back - d)) < 1e-12
        rot = rotate_about_z(d, theta)
        assert np.max(np.abs(rot[:, 2] - d[:, 2])) == 0.0
        assert np.max(np.abs(np.linalg.norm(rot, axis=1) - 1)) < 1e-12


def test_angular_error_values():
    z = np.array([0.0, 0, 1])
    x = np.array([1.0, 0, 0])
    assert angular_error(z, z) == 0.0
    assert np.isclose(angular_error(z, x), 90.0)
    diag = np.array([1.0, 0, 1]) / np.sqrt(2)
    assert np.isclose(angular_error(z, diag), 45.0)
    assert np.isclose(angular_error(z, -z), 180.0)


def test_angular_error_symmetric_and_stable_near_zero():
    rng = np.random.default_rng(5)
    a = sample_hemisphere_uniform(rng, np.pi / 2, size=200)
    b = sample_hemisphere_uniform(rng, np.pi / 2, size=200)
    assert np.allclose(angular_error(a, b), angular_error(b, a))
    # tiny perturbation: atan2 keeps resolution where arccos would not
    eps = 1e-9
    tilted = a + eps * np.cross(a, b)
    tilted /= np.linalg.norm(tilted, axis=1, keepdims=True)
    errs = angular_error(a, tilted)
    assert np.all(errs < 1e-5)
    assert np.all(errs > 0)
