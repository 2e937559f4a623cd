import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

import oracles
from geodock.geometry import (GeometryError, PocketGrid, check_bumps, min_sq_distances,
                              overlap_score, rotate_fragment)
from geodock.io import synthetic_ligand
from geodock.molecule import Pocket, make_ligand


def pocket(*pts):
    return Pocket("p", np.array(pts, dtype=float))


# -- overlap score ------------------------------------------------------------

def test_overlap_single_atom():
    assert overlap_score(np.array([[0.0, 0.0, 0.0]]), pocket((0, 0, 1))) == 1.0


def test_overlap_clamps_zero_distance():
    got = overlap_score(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 3.0]]), pocket((0, 0, 0)))
    assert got == 2.0 / (1e-12 + 9.0)
    assert got == pytest.approx(0.2222, abs=1e-4)


def test_overlap_uses_nearest_point():
    assert overlap_score(np.array([[0.0, 0.0, 2.0]]), pocket((0, 0, 1), (0, 0, 4))) == 1.0


def test_overlap_all_atoms_on_points_is_finite():
    pts = np.eye(3)
    assert overlap_score(pts, Pocket("p", pts)) == 3.0 / 3e-12


# -- rotation -----------------------------------------------------------------

def quarter_turn_ligand():
    # atom 0 at the origin, atom 1 on +z, atom 2 on +x bonded rigidly to 0
    pos = [(0, 0, 0), (0, 0, 1), (1, 0, 0)]
    return make_ligand("q", pos, [1.5] * 3, [(0, 1, True), (0, 2, False)])


def test_quarter_turn_about_z():
    L = quarter_turn_ligand()
    left, right = L.fragments[0]
    assert left.atom_indices == {0, 2}
    out = rotate_fragment(L.positions, L, left, 90)
    np.testing.assert_allclose(out[2], [0.0, 1.0, 0.0], atol=1e-15)
    assert np.array_equal(out[:2], L.positions[:2])


def test_zero_and_full_turn():
    L = quarter_turn_ligand()
    left = L.fragments[0][0]
    assert np.array_equal(rotate_fragment(L.positions, L, left, 0), L.positions)
    assert np.array_equal(rotate_fragment(L.positions, L, left, 720), L.positions)
    np.testing.assert_allclose(rotate_fragment(L.positions, L, left, 360.0000), L.positions, atol=1e-9)


def test_rotation_returns_new_array():
    L = quarter_turn_ligand()
    pose = np.array(L.positions)
    rotate_fragment(pose, L, L.fragments[0][0], 45)
    assert np.array_equal(pose, L.positions)


def test_degenerate_axis():
    L = quarter_turn_ligand()
    pose = np.array(L.positions)
    pose[1] = pose[0] + 1e-10
    with pytest.raises(GeometryError, match="degenerate"):
        rotate_fragment(pose, L, L.fragments[0][0], 10)


# -- bumps --------------------------------------------------------------------

def six_chain(x5):
    pos = [(0, 0, 0), (0, 10, 0), (0, 20, 0), (10, 20, 0), (10, 10, 0), (x5, 0, 0)]
    return make_ligand("c6", pos, [1.5] * 6, [(k, k + 1, True) for k in range(5)])


def test_close_pair_far_in_graph_bumps():
    L = six_chain(0.1)
    frag = next(f for f in L.fragments if f[0].rotamer.key == (2, 3))[0]
    assert L.graph_distances[0, 5] == 5
    assert not check_bumps(L.positions, L, frag)


def test_pair_beyond_limit_is_feasible():
    L = six_chain(2.5)
    frag = next(f for f in L.fragments if f[0].rotamer.key == (2, 3))[0]
    assert check_bumps(L.positions, L, frag)


def test_pairs_three_bonds_apart_are_ignored():
    L = make_ligand("c4", [(0, 0, 0), (0, 5, 0), (5, 5, 0), (0.1, 0, 0)], [1.5] * 4,
                    [(0, 1, True), (1, 2, True), (2, 3, True)])
    frag = next(f for f in L.fragments if f[0].rotamer.key == (1, 2))[0]
    assert L.graph_distances[0, 3] == 3
    assert check_bumps(L.positions, L, frag)


# -- properties ---------------------------------------------------------------

def generated(seed, atoms=(6, 30)):
    rng = np.random.default_rng(seed)
    n_rot = int(rng.integers(1, 5))
    n_atoms = int(rng.integers(max(atoms[0], 3 * (n_rot + 1)), min(atoms[1], 6 * (n_rot + 1)) + 1))
    return synthetic_ligand(rng, f"g{seed}", n_atoms, n_rot)


seeds = st.integers(0, 2**32 - 1)
angles = st.floats(-720, 720, allow_nan=False)


@given(seeds, angles, st.data())
def test_rotation_is_rigid_and_invertible(seed, angle, data):
    L = generated(seed)
    frag = data.draw(st.sampled_from([f for pair in L.fragments for f in pair]))
    out = rotate_fragment(L.positions, L, frag, angle)
    idx = frag.indices
    before = np.linalg.norm(L.positions[idx, None] - L.positions[None, idx], axis=-1)
    after = np.linalg.norm(out[idx, None] - out[None, idx], axis=-1)
    np.testing.assert_allclose(after, before, atol=1e-9)
    others = np.setdiff1d(np.arange(L.n_atoms), idx)
    assert np.array_equal(out[others], L.positions[others])
    assert np.array_equal(out[frag.anchor], L.positions[frag.anchor])
    back = rotate_fragment(out, L, frag, -angle)
    np.testing.assert_allclose(back, L.positions, atol=1e-9)


@given(seeds, st.integers(1, 50))
def test_overlap_is_invariant_under_rigid_motion(seed, n_points):
    rng = np.random.default_rng(seed)
    pose = rng.normal(scale=4.0, size=(int(rng.integers(1, 20)), 3))
    pts = rng.normal(scale=4.0, size=(n_points, 3))
    rot = Rotation.random(random_state=seed % 2**32)
    shift = rng.uniform(-50, 50, size=3)
    a = overlap_score(pose, Pocket("p", pts))
    b = overlap_score(rot.apply(pose) + shift, Pocket("p", rot.apply(pts) + shift))
    assert b == pytest.approx(a, rel=1e-9)


@given(seeds)
def test_overlap_decreases_when_moving_away(seed):
    rng = np.random.default_rng(seed)
    centre = rng.normal(size=3)
    dirs = rng.normal(size=(int(rng.integers(1, 8)), 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.1, 5.0, size=(len(dirs), 1))
    pk = Pocket("p", centre[None])
    near = overlap_score(centre + radii * dirs, pk)
    far = overlap_score(centre + (radii + rng.uniform(0.01, 2.0)) * dirs, pk)
    assert far < near


@given(seeds, st.integers(0, 359), st.data())
def test_bumps_match_all_pairs_oracle(seed, angle, data):
    L = generated(seed)
    frag = data.draw(st.sampled_from([f for pair in L.fragments for f in pair]))
    pose = rotate_fragment(L.positions, L, frag, angle)
    bonds = [(b.a, b.b, b.rotatable) for b in L.bonds]
    expected = oracles.bump_oracle(pose, L.radii, L.n_atoms, bonds, frag.rotamer.key)
    assert check_bumps(pose, L, frag) == expected


def test_bump_oracle_agrees_on_bumping_rotations():
    # bumps are rare in generated ligands, so hunt for some explicitly
    bumping, clean = [], []
    for seed in range(5):
        L = synthetic_ligand(np.random.default_rng(seed), "b", 60, 15)
        for pair in L.fragments:
            for frag in pair:
                for angle in range(0, 360, 5):
                    pose = rotate_fragment(L.positions, L, frag, angle)
                    (clean if check_bumps(pose, L, frag) else bumping).append((L, frag, pose))
    assert bumping
    for L, frag, pose in bumping + clean[::397]:
        bonds = [(b.a, b.b, b.rotatable) for b in L.bonds]
        expected = oracles.bump_oracle(pose, L.radii, L.n_atoms, bonds, frag.rotamer.key)
        assert check_bumps(pose, L, frag) == expected


# -- spatial index ------------------------------------------------------------

@given(seeds, st.integers(1, 80), st.sampled_from([0.4, 0.5, 1.0, 2.5]))
@settings(max_examples=20)
def test_grid_minima_are_bit_identical(seed, n_points, cell):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=3.0, size=(n_points, 3))
    queries = rng.uniform(-20, 20, size=(60, 3))
    grid = PocketGrid(pts, cell=cell, margin=5.0)
    assert np.array_equal(grid.min_sq_distances(queries), min_sq_distances(queries, pts))
    pk = Pocket("p", pts)
    assert overlap_score(queries, pk, grid) == overlap_score(queries, pk)


def test_grid_query_on_cell_faces():
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0, 1.0]])
    grid = PocketGrid(pts, cell=0.5, margin=2.0)
    faces = grid.origin + 0.5 * np.array([[k, m, j] for k in range(3, 9) for m in range(3, 9) for j in (4, 6)])
    assert np.array_equal(grid.min_sq_distances(faces), min_sq_distances(faces, pts))


def test_angle_tables_match_math():
    from geodock.geometry import angle_tables
    cos_t, sin_t = angle_tables()
    assert cos_t[90] == math.cos(math.radians(90)) and sin_t[0] == 0.0
