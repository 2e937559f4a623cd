import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geodock.molecule import (Atom, Bond, Ligand, MoleculeError, Rotamer, find_rotamers,
                              grow_fragments, make_ligand, with_positions)


def lig(n, bonds):
    pos = np.arange(3 * n, dtype=float).reshape(n, 3)
    return make_ligand("t", pos, [1.5] * n, bonds)


# -- find_rotamers ------------------------------------------------------------

def test_chain_every_bond_is_a_rotamer():
    keys = [r.key for r in find_rotamers(lig(4, [(2, 3, True), (0, 1, True), (1, 2, True)]))]
    assert keys == [(0, 1), (1, 2), (2, 3)]


def test_triangle_has_no_rotamers():
    assert find_rotamers(lig(3, [(0, 1, True), (1, 2, True), (2, 0, True)])) == []


def test_rotatable_flag_filters():
    keys = [r.key for r in find_rotamers(lig(3, [(0, 1, False), (1, 2, True)]))]
    assert keys == [(1, 2)]


def test_ring_bonds_are_dropped_but_tails_kept():
    ring_with_tail = [(0, 1, True), (1, 2, True), (2, 0, True), (2, 3, True), (3, 4, True)]
    assert [r.key for r in find_rotamers(lig(5, ring_with_tail))] == [(2, 3), (3, 4)]


# -- grow_fragments -----------------------------------------------------------

def test_chain_split_in_the_middle():
    L = lig(4, [(0, 1, True), (1, 2, True), (2, 3, True)])
    left, right = grow_fragments(L, Rotamer(Bond(1, 2)))
    assert left.atom_indices == {0, 1} and right.atom_indices == {2, 3}
    assert left.relative_size == 0.5 and right.relative_size == 0.5
    assert (left.anchor, left.pivot) == (1, 2)
    assert (right.anchor, right.pivot) == (2, 1)


def test_star_left_is_side_of_smaller_endpoint():
    L = lig(4, [(0, 1, True), (0, 2, True), (0, 3, True)])
    left, right = grow_fragments(L, Rotamer(Bond(1, 0)))
    assert left.atom_indices == {0, 2, 3} and left.relative_size == 0.75
    assert right.atom_indices == {1} and right.relative_size == 0.25


def test_two_atom_ligand():
    L = lig(2, [(0, 1, True)])
    left, right = grow_fragments(L, L.rotamers[0])
    assert (left.atom_indices, right.atom_indices) == ({0}, {1})
    assert left.relative_size == right.relative_size == 0.5


def test_non_bridge_is_rejected():
    L = lig(3, [(0, 1, True), (1, 2, True), (2, 0, True)])
    with pytest.raises(MoleculeError, match="not a bridge"):
        grow_fragments(L, Rotamer(Bond(0, 1)))


# -- validation ---------------------------------------------------------------

@pytest.mark.parametrize("n, bonds, message", [
    (3, [(0, 0, True), (0, 1, True), (1, 2, True)], "self-bond"),
    (3, [(0, 1, True), (1, 0, True), (1, 2, True)], "duplicate bond"),
    (3, [(0, 1, True), (1, 5, True)], "out of range"),
    (4, [(0, 1, True), (2, 3, True)], "disconnected ligand"),
    (1, [], "at least 2 atoms"),
])
def test_ligand_invariants(n, bonds, message):
    with pytest.raises(MoleculeError, match=message):
        lig(n, bonds)


def test_atom_invariants():
    with pytest.raises(MoleculeError, match="radius"):
        Atom(0, (0.0, 0.0, 0.0), 0.0)
    with pytest.raises(MoleculeError, match="non-finite"):
        Atom(0, (0.0, float("nan"), 0.0), 1.0)


def test_atom_order_is_checked():
    atoms = (Atom(1, (0.0, 0.0, 0.0), 1.0), Atom(0, (1.0, 0.0, 0.0), 1.0))
    with pytest.raises(MoleculeError, match="index"):
        Ligand("x", atoms, (Bond(0, 1),))


def test_with_positions_moves_atoms_only():
    L = lig(3, [(0, 1, True), (1, 2, True)])
    moved = with_positions(L, L.positions + 1.0)
    assert np.array_equal(moved.positions, L.positions + 1.0)
    assert moved.bonds == L.bonds and moved.id == L.id


# -- properties ---------------------------------------------------------------

@st.composite
def random_tree(draw, max_atoms=14):
    n = draw(st.integers(2, max_atoms))
    parents = [draw(st.integers(0, k - 1)) for k in range(1, n)]
    flags = draw(st.lists(st.booleans(), min_size=n - 1, max_size=n - 1))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3))
    bonds = {(p, k + 1): f for k, (p, f) in enumerate(zip(parents, flags))}
    for a, b in extra:
        key = (min(a, b), max(a, b))
        if a != b and key not in bonds:
            bonds[key] = True
    return n, [(a, b, f) for (a, b), f in bonds.items()]


@given(random_tree(), st.randoms(use_true_random=False))
def test_fragments_partition_the_ligand(tree, rnd):
    n, bonds = tree
    L = lig(n, bonds)
    for left, right in L.fragments:
        assert left.atom_indices | right.atom_indices == set(range(n))
        assert not left.atom_indices & right.atom_indices
        lo, hi = left.rotamer.key
        assert lo in left.atom_indices and hi in right.atom_indices
        for frag in (left, right):
            assert frag.relative_size == len(frag.atom_indices) / n
            # each side is connected on its own
            members = frag.atom_indices
            seen, todo = {frag.anchor}, [frag.anchor]
            while todo:
                u = todo.pop()
                for v in L.adjacency[u]:
                    if v in members and v not in seen:
                        seen.add(v)
                        todo.append(v)
            assert seen == members
    shuffled = list(bonds)
    rnd.shuffle(shuffled)
    assert [r.key for r in find_rotamers(lig(n, shuffled))] == [r.key for r in L.rotamers]
    assert [grow_fragments(L, r) for r in L.rotamers] == [grow_fragments(L, r) for r in L.rotamers]
