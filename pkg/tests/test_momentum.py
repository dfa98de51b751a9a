import math

import numpy as np
import pytest

from attopmm.huckel import huckel_orbitals, orbitals_by_label
from attopmm.model import GaussianPrimitive, MolecularOrbital, VolumetricGrid, evaluate_orbital
from attopmm.momentum import (
    MomentumError,
    TransformCache,
    build_hemisphere,
    build_slab,
    build_sphere,
    gaussian_ft,
    orbital_fingerprint,
    orbital_ft,
)

from oracles import quadrature_ft


def test_s_type_at_zero_momentum():
    prim = GaussianPrimitive(center=(0.0, 0.0, 0.0), exponent=1.0, powers=(0, 0, 0))
    got = gaussian_ft(prim, np.zeros(3))
    # (2 pi)^(-3/2) * (2/pi)^(3/4) * (pi)^(3/2) for a unit-exponent s function
    assert got == pytest.approx((2.0 * math.pi) ** -0.75, abs=1e-15)
    assert got.imag == 0.0
    assert quadrature_ft(prim, np.zeros(3)) == pytest.approx(got, abs=1e-12)


def test_random_primitives_match_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(20):
        prim = GaussianPrimitive(
            center=rng.uniform(-2.0, 2.0, size=3),
            exponent=rng.uniform(0.3, 3.0),
            powers=tuple(rng.integers(0, 3, size=3)))
        q = rng.uniform(-3.0, 3.0, size=3)
        closed = gaussian_ft(prim, q)
        quad = quadrature_ft(prim, q)
        assert abs(closed - quad) <= 1e-6 * max(abs(closed), 1e-3)


def test_translation_covariance():
    rng = np.random.default_rng(11)
    base = GaussianPrimitive(center=(0.0, 0.0, 0.0), exponent=0.8, powers=(1, 0, 2))
    for _ in range(5):
        d = rng.uniform(-3.0, 3.0, size=3)
        moved = GaussianPrimitive(center=d, exponent=0.8, powers=(1, 0, 2))
        q = rng.uniform(-4.0, 4.0, size=(7, 3))
        expected = np.exp(-1j * (q @ d)) * gaussian_ft(base, q)
        assert np.allclose(gaussian_ft(moved, q), expected, atol=1e-12)


def test_pz_transform_odd_in_qz():
    prim = GaussianPrimitive(center=(0.0, 0.0, 0.0), exponent=1.2, powers=(0, 0, 1))
    q = np.array([[0.3, -0.7, 0.9], [0.3, -0.7, -0.9]])
    vals = gaussian_ft(prim, q)
    assert vals[0] == pytest.approx(-vals[1], abs=1e-15)
    # odd polynomial x even Gaussian: purely imaginary at real q
    assert abs(vals[0].real) < 1e-15
    assert gaussian_ft(prim, np.array([0.3, -0.7, 0.0])) == pytest.approx(0.0, abs=1e-15)


def test_orbital_ft_linear_in_coefficients():
    prims = (GaussianPrimitive(center=(0.0, 0.0, 0.0), exponent=1.0, powers=(0, 0, 1)),
             GaussianPrimitive(center=(1.5, 0.0, 0.0), exponent=1.0, powers=(0, 0, 1)))
    grid = build_sphere(10.0, n_polar=6, n_azimuth=8)
    mo = MolecularOrbital(label="pair", coefficients=(0.3, -1.1), primitives=prims)
    combo = orbital_ft(mo, grid).values
    parts = [orbital_ft(MolecularOrbital(label=f"p{i}", coefficients=(1.0,),
                                         primitives=(prims[i],)), grid).values
             for i in range(2)]
    assert np.allclose(combo, 0.3 * parts[0] - 1.1 * parts[1], atol=1e-14)


def test_hemisphere_geometry_at_99ev():
    grid = build_hemisphere(99.0, 201, 201)
    assert grid.axis_x[-1] == pytest.approx(5.097489076422, abs=1e-9)
    assert grid.axis_x[0] == -grid.axis_x[-1]
    assert grid.shape == (201, 201)
    # every valid sample is on shell and in the upper half space
    e_au = 99.0 / 27.211386
    v = grid.samples[grid.valid]
    assert np.allclose(0.5 * np.sum(v ** 2, axis=1), e_au, atol=1e-12)
    assert np.all(v[:, 2] >= 0.0)
    # frozen count: tolerance keeps boundary lattice points deterministic
    assert int(np.sum(grid.valid)) == 31417
    assert int(np.sum(build_hemisphere(99.0, 31, 31).valid)) == 709


def test_hemisphere_boundary_tolerance():
    # axis extremes land exactly on the kinematic circle and must stay valid
    grid = build_hemisphere(99.0, 201, 201)
    mask = grid.valid.reshape(grid.shape)
    assert mask[0, 100] and mask[100, 0] and mask[200, 100] and mask[100, 200]
    # Pythagorean lattice pairs (60, 80, 100 sublattice) also sit on the rim
    assert mask[100 + 60, 100 + 80]
    assert not mask[0, 0]


def test_hemisphere_rejects_bad_energy():
    with pytest.raises(MomentumError):
        build_hemisphere(0.0, 11, 11)
    with pytest.raises(MomentumError):
        build_hemisphere(-5.0, 11, 11)


def test_sphere_weights_and_radius():
    grid = build_sphere(99.0)
    assert grid.weights.sum() == pytest.approx(4.0 * math.pi, abs=1e-12)
    q = math.sqrt(2.0 * 99.0 / 27.211386)
    assert np.allclose(np.linalg.norm(grid.samples, axis=1), q, atol=1e-12)
    with pytest.raises(MomentumError):
        build_sphere(99.0, n_polar=1)
    with pytest.raises(MomentumError):
        build_sphere(99.0, n_azimuth=2)


def test_sphere_mirror_symmetric_nodes():
    grid = build_sphere(20.0, n_polar=8, n_azimuth=12)
    pts = grid.samples
    for axis in (0, 1):
        flipped = pts.copy()
        flipped[:, axis] *= -1.0
        a = set(map(tuple, np.round(pts, 12)))
        b = set(map(tuple, np.round(flipped, 12)))
        assert a == b


def test_slab_shape():
    grid = build_slab(2.0, 5)
    assert grid.samples.shape == (125, 3)
    assert grid.samples[:, 0].min() == -2.0 and grid.samples[:, 2].max() == 2.0


def test_grid_backed_transform_matches_lcao():
    prims = (GaussianPrimitive(center=(0.6, -0.4, 0.0), exponent=1.0, powers=(0, 0, 1)),
             GaussianPrimitive(center=(-0.6, 0.4, 0.0), exponent=1.0, powers=(0, 0, 1)))
    lcao = MolecularOrbital(label="dimer", coefficients=(0.8, 0.6), primitives=prims)
    n, half = 81, 7.0
    axis = np.linspace(-half, half, n)
    step = axis[1] - axis[0]
    sampling = VolumetricGrid(origin=(-half, -half, -half), axes=np.eye(3) * step,
                              counts=(n, n, n))
    values = evaluate_orbital(lcao, sampling.points()).reshape(n, n, n)
    numeric = MolecularOrbital(label="dimer-grid", grid=sampling.with_values(values))
    q = build_sphere(8.0, n_polar=4, n_azimuth=8)
    a = orbital_ft(lcao, q).values
    b = orbital_ft(numeric, q).values
    assert np.max(np.abs(a - b)) < 1e-3 * np.max(np.abs(a))


def test_thread_determinism():
    mos = orbitals_by_label(huckel_orbitals())
    grid = build_hemisphere(99.0, 101, 101)
    ref = orbital_ft(mos["H"], grid, n_threads=1).values
    for n in (2, 4, 8):
        assert orbital_ft(mos["H"], grid, n_threads=n).values.tobytes() == ref.tobytes()


def test_transform_cache_memoizes():
    mos = orbitals_by_label(huckel_orbitals())
    grid = build_hemisphere(50.0, 21, 21)
    cache = TransformCache()
    first = cache.get(mos["H"], grid)
    assert len(cache) == 1
    assert cache.get(mos["H"], grid) is first
    assert len(cache) == 1
    cache.get(mos["L"], grid)
    assert len(cache) == 2
    other = build_hemisphere(50.0, 23, 23)
    cache.get(mos["H"], other)
    assert len(cache) == 3


def test_fingerprints_distinguish_orbitals_and_grids():
    mos = orbitals_by_label(huckel_orbitals())
    assert orbital_fingerprint(mos["H"]) != orbital_fingerprint(mos["L"])
    g1 = build_hemisphere(99.0, 21, 21)
    g2 = build_hemisphere(99.0, 23, 23)
    g3 = build_sphere(99.0, n_polar=6, n_azimuth=8)
    assert len({g1.fingerprint, g2.fingerprint, g3.fingerprint}) == 3
