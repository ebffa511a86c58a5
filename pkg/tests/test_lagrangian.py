import numpy as np
import pytest

from inviscid import dynamics as dy
from inviscid import lagrangian as lg
from inviscid import spectral as sp
from inviscid.fields import eigenmode, taylor_green
from inviscid.spectral import GridSpec

# Closed-form dissipation for sin(x1) (tests/oracles/derive.py): pi^2 (1 - exp(-2 nu t)).


@pytest.fixture(scope="module")
def g64():
    return GridSpec(64)


@pytest.fixture(scope="module")
def still(g64):
    return dy.VelocityArchive.steady(g64, np.zeros((2, 64, 64)), 1.0)


@pytest.fixture(scope="module")
def tg_archive(g64):
    u = sp.biot_savart(taylor_green(g64), g64)
    return dy.VelocityArchive.steady(g64, u, 1.0)


def labels(m, seed=0):
    return np.random.default_rng(seed).uniform(0, 2 * np.pi, size=(m, 2))


# -- interpolation and noise -----------------------------------------------------


def test_spline_interpolation_accuracy(g64):
    x1, x2 = g64.mesh
    f = np.sin(x1) * np.cos(2 * x2)
    pts = labels(500)
    got = lg.interpolate(lg.spline_coefficients(f), pts, g64)[:, 0]
    assert np.max(np.abs(got - np.sin(pts[:, 0]) * np.cos(2 * pts[:, 1]))) < 1e-4
    # exact at nodes
    idx = np.array([[3, 7], [60, 0]])
    np.testing.assert_allclose(lg.interpolate(lg.spline_coefficients(f), idx * g64.dx, g64)[:, 0],
                               f[idx[:, 0], idx[:, 1]], atol=1e-12)


def test_brownian_increments_reproducible_and_independent():
    a = lg.brownian_increments(3, "x", 5, 4000, 0.01)
    np.testing.assert_array_equal(a, lg.brownian_increments(3, "x", 5, 4000, 0.01))
    b = lg.brownian_increments(3, "x", 6, 4000, 0.01)
    c = lg.brownian_increments(3, "y", 5, 4000, 0.01)
    assert a.shape == (4000, 2)
    assert a.std() == pytest.approx(0.1, rel=0.03)
    # consecutive steps and distinct labels are uncorrelated (not shifted copies)
    for other in (b, c):
        assert abs(np.corrcoef(a.ravel(), other.ravel())[0, 1]) < 0.03
    assert abs(np.corrcoef(a[1:, 0], b[:-1, 0])[0, 1]) < 0.03
    # the first M rows do not depend on M
    np.testing.assert_array_equal(lg.brownian_increments(3, "x", 5, 10, 0.01), a[:10])


# -- forward and backward maps ------------------------------------------------------


def test_zero_velocity_deterministic(still):
    x = labels(20)
    ens = lg.advect(x, still, 0.0, 1, 0.1, 1.0)
    np.testing.assert_array_equal(ens.unwrapped[0], x)
    back = lg.back_to_labels(x, still, 0.0, 1, 0.1, 1.0)
    np.testing.assert_array_equal(back.unwrapped[0], x)


@pytest.mark.parametrize("fn", [lg.advect, lg.back_to_labels])
def test_zero_velocity_brownian_variance(still, fn):
    nu, t, M = 0.02, 1.0, 10_000
    ens = fn(labels(3), still, nu, M, 0.1, t, seed=4)
    d = ens.displacement[:, 0, :]
    var = d.var(axis=0, ddof=1)
    se = 2 * nu * t * np.sqrt(2.0 / (M - 1))  # SE of a Gaussian sample variance
    assert np.all(np.abs(var - 2 * nu * t) <= 3 * se)
    # spatially uniform noise: all labels move together within a realization
    np.testing.assert_allclose(ens.displacement[:, 1], ens.displacement[:, 0], atol=1e-13)
    assert np.all((ens.positions >= 0) & (ens.positions < 2 * np.pi))


def test_rigid_rotation_orbits():
    # rigid rotation about (pi, pi); the Heun drift preserves the radius to O(dt^2)
    c = np.array([np.pi, np.pi])

    def rotation(x, t):
        r = x - c
        return np.stack([-r[..., 1], r[..., 0]], axis=-1)

    x0 = c + np.array([[0.5, 0.0], [0.0, 1.0], [-0.3, 0.4]])
    drift = []
    for dt in (1e-2, 5e-3):
        _, x = lg._integrate(x0, rotation, 0.0, 1, dt, 1.0, 0, "rot", "heun")
        r0 = np.linalg.norm(x0 - c, axis=1)
        drift.append(np.max(np.abs(np.linalg.norm(x[0] - c, axis=1) - r0) / r0))
        # angle advances by t
        ang = np.angle((x[0] - c) @ [1, 1j]) - np.angle((x0 - c) @ [1, 1j])
        np.testing.assert_allclose(np.mod(ang, 2 * np.pi), 1.0, atol=10 * dt**2)
    assert drift[0] < 1e-3
    # at least second order (Heun on a rotation is in fact third order in the radius)
    assert drift[0] / drift[1] >= 3.6


def test_zero_noise_reproduces_deterministic_path(tg_archive):
    x = labels(10)
    a = lg.advect(x, tg_archive, 0.0, 1, 1e-2, 1.0, seed=1)
    b = lg.advect(x, tg_archive, 0.0, 3, 1e-2, 1.0, seed=99)
    for m in range(3):
        np.testing.assert_array_equal(b.unwrapped[m], a.unwrapped[0])


def test_round_trip_small(tg_archive):
    x = labels(200, 2)
    fwd = lg.advect(x, tg_archive, 0.0, 1, 1e-2, 1.0)
    back = lg.back_to_labels(fwd.unwrapped[0], tg_archive, 0.0, 1, 1e-2, 1.0)
    assert np.max(np.abs(back.unwrapped[0] - x)) < 1e-3


def test_measure_preservation(tg_archive):
    h = 1e-3
    base = labels(50, 3)
    tri = np.concatenate([base, base + [h, 0], base + [0, h]])
    idx = np.arange(50)
    triangles = np.column_stack([idx, idx + 50, idx + 100])
    a0 = lg.triangle_areas(tri, triangles)
    ens = lg.advect(tri, tg_archive, 0.0, 1, 1e-3, 1.0)
    a1 = lg.triangle_areas(ens.unwrapped[0], triangles)
    # triangle area tracks the Jacobian up to an O(h) curvature term
    assert np.max(np.abs(a1 / a0 - 1)) < 1e-3


def test_coverage_and_dt_errors(g64, still):
    with pytest.raises(ValueError):
        lg.advect(labels(2), still, 0.0, 1, 0.1, 2.0)
    with pytest.raises(ValueError):
        lg.advect(labels(2), still, 0.0, 1, 0.0, 1.0)
    with pytest.raises(ValueError):
        lg.advect(labels(2), still, 0.0, 0, 0.1, 1.0)


def test_ensemble_csv(tmp_path, still):
    ens = lg.advect(labels(4), still, 0.01, 50, 0.1, 1.0)
    ens.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "point,mean_x1,mean_x2,var_x1,var_x2,se_x1,se_x2"
    assert len(lines) == 5


# -- Monte-Carlo representation ------------------------------------------------------


def test_mc_constant_field_exact(g64, still):
    est = lg.mc_vorticity(np.full((64, 64), 0.3), still, 0.05, 20, 0.1, 1.0, labels(8))
    np.testing.assert_allclose(est.mean, 0.3, atol=1e-14)


def test_mc_sin_gaussian_smoothing(g64, still):
    nu, t, M = 0.05, 1.0, 10_000
    pts = labels(16, 5)
    est = lg.mc_vorticity(eigenmode(1, g64), still, nu, M, 0.1, t, pts, seed=6)
    exact = np.exp(-nu * t) * np.sin(pts[:, 0])  # oracle: Gaussian smoothing of sin
    assert np.all(np.abs(est.mean - exact) <= 3 * est.standard_error + 1e-4)


def test_mc_rejects_forced_or_mismatched(g64, still):
    forced = dy.VelocityArchive(g64, still.times, still.velocities, forced=True)
    with pytest.raises(ValueError):
        lg.mc_vorticity(eigenmode(1, g64), forced, 0.01, 2, 0.1, 1.0, labels(2))
    other = dy.VelocityArchive(g64, still.times, still.velocities, nu=0.02)
    with pytest.raises(ValueError):
        lg.mc_vorticity(eigenmode(1, g64), other, 0.01, 2, 0.1, 1.0, labels(2))


def test_mc_csv(tmp_path, still, g64):
    est = lg.mc_vorticity(eigenmode(1, g64), still, 0.01, 10, 0.1, 1.0, labels(3))
    est.to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "point,mean,variance,se"


# -- fluctuation-dissipation ----------------------------------------------------------


def test_fdr_time_zero(g64):
    traj = dy.evolve(eigenmode(1, g64), g64, dy.SimulationConfig(nu=0.05, dt=0.01, t_end=0.0))
    res = lg.fdr_check(traj, 100, 0.1)
    assert res.lhs == 0.0 and res.rhs == 0.0


def test_fdr_sin_closed_form(g64):
    nu, t = 0.05, 1.0
    traj = dy.evolve(eigenmode(1, g64), g64, dy.SimulationConfig(nu=nu, dt=0.01, t_end=t))
    res = lg.fdr_check(traj, 10_000, 0.1, seed=2, eval_n=16)
    exact = np.pi**2 * (1 - np.exp(-2 * nu * t))
    assert res.lhs == pytest.approx(exact, rel=1e-6)
    assert abs(res.rhs - exact) <= 3 * res.standard_error + 1e-4


def test_fdr_rejects_inviscid(g64):
    traj = dy.evolve(eigenmode(1, g64), g64, dy.SimulationConfig(nu=0.0, dt=0.01, t_end=0.2))
    with pytest.raises(ValueError):
        lg.fdr_check(traj, 10, 0.1)


# -- pair separation ---------------------------------------------------------------


def test_pair_separation_zero_velocity(still):
    res = lg.pair_separation(still, 0.05, (1e-3, 1e-2, 1e-1), 20, 0.1, 1.0, seed=3)
    assert res.exponents[-1] == pytest.approx(1.0, abs=0.02)
    # shared noise cancels: separations are preserved exactly
    np.testing.assert_allclose(res.mean_distance[-1], res.deltas, rtol=1e-9)


def test_pair_separation_needs_two_decades(still):
    with pytest.raises(ValueError):
        lg.pair_separation(still, 0.0, (1e-2, 1e-1), 1, 0.1, 1.0)


def test_pair_separation_taylor_green(tg_archive):
    res = lg.pair_separation(tg_archive, 0.0, (1e-3, 1e-2, 1e-1), 1, 1e-2, 1.0, report_every=50)
    assert res.times.tolist() == pytest.approx([0.5, 1.0])
    assert np.all(res.exponents > 0.5)
