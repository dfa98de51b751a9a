import numpy as np
import pytest

from attopmm.huckel import (
    HuckelError,
    PiSystemGraph,
    build_pentacene_graph,
    huckel_orbitals,
    orbitals_by_label,
    orbitals_by_offset,
    pentacene_atoms,
)
from attopmm.model import orbital_overlap


def test_pentacene_graph_counts():
    graph = build_pentacene_graph()
    assert graph.n_sites == 22
    assert len(graph.bonds) == 26
    # planar, centrosymmetric carbon frame
    assert np.allclose(graph.positions[:, 2], 0.0)
    centered = set(map(tuple, np.round(graph.positions, 9)))
    flipped = set(map(tuple, np.round(-graph.positions, 9)))
    assert centered == flipped


def test_graph_validation():
    line = np.array([[0.0, 0.0, 0.0], [1.4, 0.0, 0.0], [2.8, 0.0, 0.0]])
    with pytest.raises(HuckelError):
        PiSystemGraph(positions=line, bonds=((0, 1), (1, 0)))
    with pytest.raises(HuckelError):
        PiSystemGraph(positions=line, bonds=((0, 1), (1, 5)))
    with pytest.raises(HuckelError):
        PiSystemGraph(positions=line, bonds=((0, 1),))  # site 2 disconnected


def test_alternant_energy_pairing():
    orbitals = huckel_orbitals()
    assert len(orbitals) == 22
    e = np.array([mo.energy for mo in orbitals])
    assert np.all(np.diff(e) >= -1e-12)
    # bipartite lattice: spectrum symmetric about the on-site energy
    assert np.allclose(e + e[::-1], 0.0, atol=1e-12)


def test_frontier_parity_tags():
    mos = orbitals_by_label(huckel_orbitals())
    expected = {
        "H-4": (1, 1), "H-3": (1, -1), "H-2": (-1, 1), "H-1": (-1, -1),
        "H": (1, -1), "L": (1, 1), "L+1": (-1, 1), "L+2": (-1, -1),
    }
    for label, (px, py) in expected.items():
        assert mos[label].parities == (px, py, -1), label


def test_lcao_orthonormal_under_gaussian_metric():
    orbitals = huckel_orbitals()
    for i in (0, 7, 10, 11, 14, 21):
        for j in (0, 7, 10, 11, 14, 21):
            s = orbital_overlap(orbitals[i], orbitals[j])
            assert s == pytest.approx(1.0 if i == j else 0.0, abs=1e-10)


def test_site_vectors_orthonormal():
    orbitals = huckel_orbitals()
    v = np.stack([mo.site_vector for mo in orbitals], axis=1)
    assert np.allclose(v.T @ v, np.eye(22), atol=1e-12)


def test_orbitals_deterministic():
    a = huckel_orbitals()
    b = huckel_orbitals()
    for mo_a, mo_b in zip(a, b):
        assert mo_a.coefficients.tobytes() == mo_b.coefficients.tobytes()
        assert mo_a.energy == mo_b.energy


def test_label_and_offset_lookup():
    orbitals = huckel_orbitals()
    by_label = orbitals_by_label(orbitals)
    by_offset = orbitals_by_offset(orbitals)
    assert by_label["H"] is by_offset[0]
    assert by_label["L"] is by_offset[1]
    assert by_label["H-10"] is by_offset[-10]
    assert by_label["L+10"] is by_offset[11]


def test_exponent_validation():
    with pytest.raises(HuckelError):
        huckel_orbitals(p_exponent=0.0)


def test_pentacene_atoms():
    atoms = pentacene_atoms()
    assert len(atoms) == 36
    zs = sorted(z for z, _ in atoms)
    assert zs.count(6) == 22 and zs.count(1) == 14
    pos = np.array([p for _, p in atoms])
    assert np.allclose(pos[:, 2], 0.0)
