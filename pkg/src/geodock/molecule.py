"""Ligands, pockets and the bond-graph analysis that finds rotatable bridges.

A ligand is a set of atoms joined by bonds. Bonds flagged as rotatable that
are also bridges of the bond graph (removing them splits the molecule in two)
are the rotamers; each one defines a left and a right fragment that can be
spun rigidly about the bond axis.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class MoleculeError(ValueError):
    """Raised when a ligand, pocket or fragment violates its invariants."""


@dataclass(frozen=True)
class Atom:
    index: int
    position: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise MoleculeError(f"atom {self.index}: radius must be positive, got {self.radius}")
        if not all(np.isfinite(self.position)):
            raise MoleculeError(f"atom {self.index}: non-finite position {self.position}")


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    rotatable: bool = True

    @property
    def key(self) -> tuple[int, int]:
        return (min(self.a, self.b), max(self.a, self.b))


@dataclass(frozen=True)
class Rotamer:
    bond: Bond

    @property
    def key(self) -> tuple[int, int]:
        return self.bond.key


@dataclass(frozen=True)
class Fragment:
    """One side of a rotamer.

    ``anchor`` is the rotamer endpoint that belongs to this fragment and
    ``pivot`` the opposite endpoint; the rotation axis runs anchor -> pivot.
    """

    rotamer: Rotamer
    side: str
    atom_indices: frozenset[int]
    relative_size: float
    anchor: int
    pivot: int

    @cached_property
    def indices(self) -> np.ndarray:
        return np.array(sorted(self.atom_indices), dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Ligand:
    """A flexible molecule. Immutable; derived graph data is cached."""

    id: str
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        n = len(self.atoms)
        if n < 2:
            raise MoleculeError(f"ligand {self.id}: needs at least 2 atoms, got {n}")
        for i, atom in enumerate(self.atoms):
            if atom.index != i:
                raise MoleculeError(f"ligand {self.id}: atom at position {i} has index {atom.index}")
        seen = set()
        for bond in self.bonds:
            if bond.a == bond.b:
                raise MoleculeError(f"ligand {self.id}: self-bond on atom {bond.a}")
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise MoleculeError(f"ligand {self.id}: bond {bond.a}-{bond.b} index out of range")
            if bond.key in seen:
                raise MoleculeError(f"ligand {self.id}: duplicate bond {bond.key[0]}-{bond.key[1]}")
            seen.add(bond.key)
        if len(_components(n, self.adjacency)) != 1:
            raise MoleculeError(f"ligand {self.id}: disconnected ligand")

    def __eq__(self, other):
        if not isinstance(other, Ligand):
            return NotImplemented
        return (self.id, self.atoms, self.bonds) == (other.id, other.atoms, other.bonds)

    def __hash__(self):
        return hash((self.id, len(self.atoms), len(self.bonds)))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @cached_property
    def positions(self) -> np.ndarray:
        pos = np.array([a.position for a in self.atoms], dtype=np.float64)
        pos.flags.writeable = False
        return pos

    @cached_property
    def radii(self) -> np.ndarray:
        r = np.array([a.radius for a in self.atoms], dtype=np.float64)
        r.flags.writeable = False
        return r

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            nbrs[bond.a].append(bond.b)
            nbrs[bond.b].append(bond.a)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def rotamers(self) -> tuple[Rotamer, ...]:
        return tuple(find_rotamers(self))

    @cached_property
    def fragments(self) -> tuple[tuple[Fragment, Fragment], ...]:
        return tuple(grow_fragments(self, rot) for rot in self.rotamers)

    @cached_property
    def graph_distances(self) -> np.ndarray:
        """All-pairs bond-graph distances (number of bonds on the shortest path)."""
        n = self.n_atoms
        dist = np.full((n, n), -1, dtype=np.int64)
        for src in range(n):
            row = dist[src]
            row[src] = 0
            queue = deque([src])
            while queue:
                u = queue.popleft()
                for v in self.adjacency[u]:
                    if row[v] < 0:
                        row[v] = row[u] + 1
                        queue.append(v)
        dist.flags.writeable = False
        return dist


@dataclass(frozen=True, eq=False)
class Pocket:
    """Rigid binding site represented by a cloud of sphere centres."""

    id: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if len(pts) < 1:
            raise MoleculeError(f"pocket {self.id}: needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise MoleculeError(f"pocket {self.id}: non-finite point")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        if not isinstance(other, Pocket):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.id, len(self.points)))

    @property
    def n_points(self) -> int:
        return len(self.points)


def _components(n, adjacency, removed=None):
    """Connected components, optionally with one edge ``removed``."""
    comp = [-1] * n
    out = []
    for start in range(n):
        if comp[start] >= 0:
            continue
        label = len(out)
        comp[start] = label
        members = [start]
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adjacency[u]:
                if removed is not None and {u, v} == removed:
                    continue
                if comp[v] < 0:
                    comp[v] = label
                    members.append(v)
                    stack.append(v)
        out.append(members)
    return out


def _bridges(n, adjacency):
    """Tarjan's bridge finding, iterative. Returns a set of (min, max) pairs."""
    disc = [-1] * n
    low = [0] * n
    bridges = set()
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # (node, parent, iterator position)
        stack = [(root, -1, 0)]
        while stack:
            u, parent, pos = stack[-1]
            nbrs = adjacency[u]
            if pos < len(nbrs):
                stack[-1] = (u, parent, pos + 1)
                v = nbrs[pos]
                if v == parent:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, u, 0))
                else:
                    low[u] = min(low[u], disc[v])
            else:
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[u])
                    if low[u] > disc[parent]:
                        bridges.add((min(u, parent), max(u, parent)))
    return bridges


def find_rotamers(ligand: Ligand) -> list[Rotamer]:
    """Every rotatable bond that is a bridge, ordered by its (min, max) atom indices.

    Rotatable bonds inside rings are not bridges and are dropped.
    """
    bridges = _bridges(ligand.n_atoms, ligand.adjacency)
    rotatable = [b for b in ligand.bonds if b.rotatable and b.key in bridges]
    rotatable.sort(key=lambda b: b.key)
    return [Rotamer(Bond(b.key[0], b.key[1], True)) for b in rotatable]


def grow_fragments(ligand: Ligand, rotamer: Rotamer) -> tuple[Fragment, Fragment]:
    """Split ``ligand`` at ``rotamer`` into its (left, right) fragments.

    The left fragment is the component holding the bond endpoint with the
    smaller atom index. Each endpoint stays in its own fragment.
    """
    lo, hi = rotamer.key
    comps = _components(ligand.n_atoms, ligand.adjacency, removed={lo, hi})
    if len(comps) != 2:
        raise MoleculeError(
            f"ligand {ligand.id}: bond {lo}-{hi} is not a bridge ({len(comps)} components)"
        )
    left = next(c for c in comps if lo in c)
    right = next(c for c in comps if hi in c)
    n = ligand.n_atoms
    return (
        Fragment(rotamer, "left", frozenset(left), len(left) / n, anchor=lo, pivot=hi),
        Fragment(rotamer, "right", frozenset(right), len(right) / n, anchor=hi, pivot=lo),
    )


def make_ligand(id, positions, radii, bonds) -> Ligand:
    """Convenience constructor from arrays and ``(a, b, rotatable)`` triples."""
    atoms = [
        Atom(i, tuple(float(c) for c in p), float(r))
        for i, (p, r) in enumerate(zip(positions, radii))
    ]
    return Ligand(id, tuple(atoms), tuple(Bond(int(a), int(b), bool(rot)) for a, b, rot in bonds))


def with_positions(ligand: Ligand, pose) -> Ligand:
    """Copy of ``ligand`` with its atoms moved to ``pose`` (same id and bonds)."""
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (ligand.n_atoms, 3):
        raise MoleculeError(f"pose shape {pose.shape} does not match {ligand.n_atoms} atoms")
    atoms = tuple(Atom(a.index, tuple(float(c) for c in p), a.radius) for a, p in zip(ligand.atoms, pose))
    return Ligand(ligand.id, atoms, ligand.bonds)
