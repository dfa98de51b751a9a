"""Momentum-space machinery: closed-form Fourier transforms of Gaussian
primitives, numeric transforms of grid-backed orbitals, momentum grids, and
a transform cache.

Transform convention:  F[phi](q) = (2 pi)^{-3/2} Integral d^3r e^{-i q.r} phi(r).
(The sign matches the photoemission matrix element; for real orbitals |F|^2
is insensitive to the sign up to the relabeling q -> -q.)

For a Cartesian power u^l along one axis the 1D factor is

    Integral u^l e^{-i k u - a u^2} du
        = sqrt(pi/a) * (-i / (2 sqrt(a)))^l * H_l(k / (2 sqrt(a))) * e^{-k^2/(4a)}

with H_l the physicists' Hermite polynomial (derivative rule applied to the
s-type transform in closed form).

Determinism: all per-sample accumulations run as sequential loops over
primitives/orbitals with elementwise vector arithmetic, and threaded
evaluation splits samples into fixed-size blocks independent of the thread
count, so results are byte-identical for any number of threads.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermval

from .model import (
    BOHR_ANGSTROM,
    GaussianPrimitive,
    MolecularOrbital,
    ModelError,
    ev_to_hartree,
    inv_angstrom_to_au,
)

_THREAD_BLOCK = 4096  # fixed work-unit size; partitioning never depends on thread count


class MomentumError(ValueError):
    """Unsupported or inconsistent momentum-space request."""


# ---------------------------------------------------------------------------
# closed-form transform

def _axis_factor(l, k, exponent):
    """1D factor for Cartesian power l at momentum k (vectorized in k)."""
    root = math.sqrt(exponent)
    base = math.sqrt(math.pi / exponent) * np.exp(-(k * k) / (4.0 * exponent))
    if l == 0:
        return base.astype(complex) if isinstance(base, np.ndarray) else complex(base)
    herm = hermval(k / (2.0 * root), [0.0] * l + [1.0])
    return base * herm * (-1j / (2.0 * root)) ** l


def gaussian_ft(prim: GaussianPrimitive, q):
    """Closed-form transform of a normalized primitive at q (a.u.).

    q has shape (3,) -> complex scalar, or (N, 3) -> complex (N,) array.
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    qs = q.reshape(-1, 3)
    out = np.full(len(qs), prim.norm * (2.0 * math.pi) ** -1.5, dtype=complex)
    out *= np.exp(-1j * (qs @ prim.center))
    for axis, l in enumerate(prim.powers):
        out *= _axis_factor(l, qs[:, axis], prim.exponent)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# momentum grids

@dataclass(frozen=True)
class MomentumGrid:
    """Sample set in momentum space (a.u. internally).

    mode "constant-energy-hemisphere": raster over in-plane (q_x, q_y) with
    q_z = +sqrt(2 eps - q_x^2 - q_y^2); samples outside the kinematic disc
    are flagged invalid. mode "full-sphere" carries quadrature weights
    (sum = 4 pi) for angle integration. mode "cartesian-slab" is a plain
    rectangular raster.
    """

    mode: str
    samples: np.ndarray          # (N, 3) a.u.
    valid: np.ndarray            # (N,) bool
    energy_ev: float = None
    shape: tuple = None          # raster shape for map modes
    axis_x: np.ndarray = None    # 1D raster coordinates, 1/Angstrom
    axis_y: np.ndarray = None
    weights: np.ndarray = None   # quadrature weights (full-sphere)

    def __post_init__(self):
        samples = np.ascontiguousarray(np.asarray(self.samples, dtype=float).reshape(-1, 3))
        valid = np.ascontiguousarray(np.asarray(self.valid, dtype=bool).reshape(-1))
        if len(valid) != len(samples):
            raise ModelError("valid mask length does not match samples")
        samples.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "valid", valid)
        for name in ("axis_x", "axis_y", "weights"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float).copy()
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def n_samples(self):
        return len(self.samples)

    @property
    def fingerprint(self):
        h = hashlib.blake2b(digest_size=16)
        h.update(self.mode.encode())
        h.update(np.ascontiguousarray(self.samples).tobytes())
        h.update(np.ascontiguousarray(self.valid).tobytes())
        return h.hexdigest()


def build_hemisphere(energy_ev, nx, ny, q_max_inv_angstrom=None):
    """Constant-energy hemisphere raster at photoelectron energy eps (eV).

    Uniform (q_x, q_y) raster spanning +-q_max (1/Angstrom; defaults to the
    kinematic disc radius sqrt(2 eps)), with q_z = +sqrt(2 eps - q_x^2 - q_y^2).
    """
    if not energy_ev > 0:
        raise MomentumError(f"photoelectron energy must be positive, got {energy_ev}")
    e_au = ev_to_hartree(energy_ev)
    q_disc_au = math.sqrt(2.0 * e_au)
    q_max = q_disc_au / BOHR_ANGSTROM if q_max_inv_angstrom is None else float(q_max_inv_angstrom)
    axis_x = np.linspace(-q_max, q_max, int(nx))
    axis_y = np.linspace(-q_max, q_max, int(ny))
    qx = inv_angstrom_to_au(axis_x)[:, None] * np.ones(int(ny))[None, :]
    qy = np.ones(int(nx))[:, None] * inv_angstrom_to_au(axis_y)[None, :]
    qz_sq = 2.0 * e_au - qx ** 2 - qy ** 2
    # Relative tolerance keeps raster points that land on the kinematic
    # circle only up to float rounding (axis extremes, Pythagorean index
    # pairs) deterministically inside; mirrors the exporter's predicate.
    valid = qz_sq >= -2.0 * e_au * 1e-12
    qz = np.sqrt(np.clip(qz_sq, 0.0, None))
    samples = np.stack([qx.ravel(), qy.ravel(), qz.ravel()], axis=1)
    return MomentumGrid(mode="constant-energy-hemisphere", samples=samples,
                        valid=valid.ravel(), energy_ev=float(energy_ev),
                        shape=(int(nx), int(ny)), axis_x=axis_x, axis_y=axis_y)


def build_sphere(energy_ev, n_polar=48, n_azimuth=96):
    """Full-sphere product quadrature at fixed |q| = sqrt(2 eps).

    Gauss-Legendre nodes in cos(theta) x uniform azimuth (weights sum to
    4 pi). An even n_azimuth makes the node set exactly symmetric under
    q_x -> -q_x and q_y -> -q_y.
    """
    if not energy_ev > 0:
        raise MomentumError(f"photoelectron energy must be positive, got {energy_ev}")
    if n_polar < 2 or n_azimuth < 4:
        raise MomentumError(f"unsupported quadrature order ({n_polar}, {n_azimuth})")
    q = math.sqrt(2.0 * ev_to_hartree(energy_ev))
    u, w_u = np.polynomial.legendre.leggauss(int(n_polar))
    phi = 2.0 * math.pi * np.arange(int(n_azimuth)) / int(n_azimuth)
    st = np.sqrt(1.0 - u ** 2)
    dirs = np.stack([
        (st[:, None] * np.cos(phi)[None, :]).ravel(),
        (st[:, None] * np.sin(phi)[None, :]).ravel(),
        (u[:, None] * np.ones(len(phi))[None, :]).ravel(),
    ], axis=1)
    weights = (w_u[:, None] * np.full(len(phi), 2.0 * math.pi / len(phi))[None, :]).ravel()
    samples = q * dirs
    return MomentumGrid(mode="full-sphere", samples=samples,
                        valid=np.ones(len(samples), dtype=bool),
                        energy_ev=float(energy_ev), weights=weights)


def build_slab(q_max_au, n):
    """Uniform cubic raster |q_i| <= q_max (a.u.) with n points per axis."""
    axis = np.linspace(-float(q_max_au), float(q_max_au), int(n))
    qx, qy, qz = np.meshgrid(axis, axis, axis, indexing="ij")
    samples = np.stack([qx.ravel(), qy.ravel(), qz.ravel()], axis=1)
    return MomentumGrid(mode="cartesian-slab", samples=samples,
                        valid=np.ones(len(samples), dtype=bool),
                        shape=(int(n), int(n), int(n)))


# ---------------------------------------------------------------------------
# orbital transforms

@dataclass(frozen=True)
class MomentumAmplitude:
    """Complex transform of one orbital sampled on one momentum grid."""

    orbital_label: str
    values: np.ndarray
    grid_fingerprint: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def _blocks(n):
    return [(s, min(s + _THREAD_BLOCK, n)) for s in range(0, n, _THREAD_BLOCK)]


def _run_blocks(fn, n, n_threads):
    """Apply fn(start, stop) over fixed-size sample blocks, optionally threaded.

    The block partition is independent of n_threads, and fn writes disjoint
    output rows, so results are byte-identical for every thread count.
    """
    blocks = _blocks(n)
    if n_threads and n_threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=int(n_threads)) as pool:
            list(pool.map(lambda b: fn(*b), blocks))
    else:
        for b in blocks:
            fn(*b)


def orbital_ft(mo: MolecularOrbital, grid: MomentumGrid, n_threads=1):
    """Transform of an orbital on a grid: LCAO in closed form, volumetric
    grids by Riemann sum with voxel-volume weights (same continuum
    normalization), evaluated at exactly the requested q samples."""
    q = grid.samples
    out = np.zeros(len(q), dtype=complex)
    if mo.is_lcao:
        def run(start, stop):
            acc = np.zeros(stop - start, dtype=complex)
            for c, prim in zip(mo.coefficients, mo.primitives):
                acc += c * gaussian_ft(prim, q[start:stop])
            out[start:stop] = acc
    else:
        g = mo.grid
        off = g.axes @ g.axes.T
        if np.max(np.abs(off - np.diag(np.diag(off)))) > 1e-12:
            raise MomentumError("numeric transform supports orthogonal grid axes only")
        pts = g.points()
        vals = np.asarray(g.values).ravel()
        w = g.voxel_volume * (2.0 * math.pi) ** -1.5

        def run(start, stop):
            block = q[start:stop]
            out[start:stop] = w * (np.exp(-1j * (block @ pts.T)) @ vals)

    _run_blocks(run, len(q), n_threads)
    return MomentumAmplitude(orbital_label=mo.label, values=out,
                             grid_fingerprint=grid.fingerprint)


def orbital_fingerprint(mo: MolecularOrbital):
    h = hashlib.blake2b(digest_size=16)
    h.update(str(mo.label).encode())
    if mo.is_lcao:
        h.update(np.ascontiguousarray(mo.coefficients).tobytes())
        for p in mo.primitives:
            h.update(np.ascontiguousarray(p.center).tobytes())
            h.update(np.float64(p.exponent).tobytes())
            h.update(bytes(p.powers))
    else:
        g = mo.grid
        h.update(np.ascontiguousarray(g.origin).tobytes())
        h.update(np.ascontiguousarray(g.axes).tobytes())
        h.update(np.ascontiguousarray(g.values).tobytes())
    return h.hexdigest()


class TransformCache:
    """Memoizes orbital transforms keyed on (orbital, grid) fingerprints.

    Amplitudes can be reused across all probe times: time enters the signal
    only through Dyson coefficients, never through the transforms.
    """

    def __init__(self):
        self._store = {}

    def get(self, mo: MolecularOrbital, grid: MomentumGrid, n_threads=1):
        key = (orbital_fingerprint(mo), grid.fingerprint)
        hit = self._store.get(key)
        if hit is None:
            hit = orbital_ft(mo, grid, n_threads=n_threads)
            self._store[key] = hit
        return hit

    def __len__(self):
        return len(self._store)
