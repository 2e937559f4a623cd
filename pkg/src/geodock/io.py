"""Plain-text pocket and ligand formats plus the seeded synthetic generator.

Pocket file::

    # comments start with '#'
    POCKET <id> <n>
    <x> <y> <z>            (n lines, angstrom)

Ligand file, any number of records::

    LIGAND <id> <natoms> <nbonds>
    ATOM <idx> <x> <y> <z> <radius>      (natoms lines)
    BOND <i> <j> <R|F>                   (nbonds lines, R = rotatable)

Floats are written with ``repr`` so a parse of a render is bit exact.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .geometry import BUMP_MIN_BONDS as BUMP_BONDS
from .molecule import Atom, Bond, Ligand, MoleculeError, Pocket


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"{message} at line {line}")


class LigandRecordError(ParseError):
    """A single bad ligand record. Carries the record id when it was readable."""

    def __init__(self, message, line=None, ligand_id=None):
        self.ligand_id = ligand_id
        super().__init__(message, line)


def _lines(source) -> Iterator[tuple[int, str]]:
    if isinstance(source, str):
        source = source.splitlines()
    for n, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield n, line


def _floats(tokens, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"non-numeric token in {' '.join(tokens)!r}", lineno) from None


# -- pockets -----------------------------------------------------------------

def parse_pocket(text) -> Pocket:
    last = 0
    header = None
    points = []
    expected = 0
    for lineno, line in _lines(text):
        last = lineno
        tokens = line.split()
        if header is None:
            if tokens[0] != "POCKET" or len(tokens) != 3:
                raise ParseError("missing 'POCKET <id> <n>' header", lineno)
            try:
                expected = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad point count {tokens[2]!r}", lineno) from None
            header = tokens[1]
            continue
        if len(points) == expected:
            raise ParseError(f"expected {expected} points, found extra data", lineno)
        if len(tokens) != 3:
            raise ParseError(f"expected 3 coordinates, got {len(tokens)}", lineno)
        points.append(_floats(tokens, lineno))
    if header is None:
        raise ParseError("missing 'POCKET <id> <n>' header", last + 1)
    if len(points) != expected:
        raise ParseError(f"expected {expected} points, found {len(points)}", last + 1)
    try:
        return Pocket(header, np.array(points, dtype=np.float64).reshape(-1, 3))
    except MoleculeError as exc:
        raise ParseError(str(exc), last + 1) from None


def render_pocket(pocket: Pocket) -> str:
    rows = [f"POCKET {pocket.id} {pocket.n_points}"]
    rows += [" ".join(repr(float(v)) for v in p) for p in pocket.points]
    return "\n".join(rows) + "\n"


# -- ligands -----------------------------------------------------------------

def _read_record(header_no, tokens, lines):
    if len(tokens) != 4:
        raise LigandRecordError("expected 'LIGAND <id> <natoms> <nbonds>'", header_no)
    lig_id = tokens[1]
    try:
        natoms, nbonds = int(tokens[2]), int(tokens[3])
    except ValueError:
        raise LigandRecordError("bad atom/bond counts", header_no, lig_id) from None
    atoms, bonds = [], []
    lineno = header_no
    for _ in range(natoms):
        lineno, line = next(lines, (lineno + 1, ""))
        t = line.split()
        if len(t) != 6 or t[0] != "ATOM":
            raise LigandRecordError(f"expected ATOM line, got {line!r}", lineno, lig_id)
        try:
            idx = int(t[1])
            x, y, z, r = (float(v) for v in t[2:])
        except ValueError:
            raise LigandRecordError(f"non-numeric token in {line!r}", lineno, lig_id) from None
        try:
            atoms.append(Atom(idx, (x, y, z), r))
        except MoleculeError as exc:
            raise LigandRecordError(str(exc), lineno, lig_id) from None
    for _ in range(nbonds):
        lineno, line = next(lines, (lineno + 1, ""))
        t = line.split()
        if len(t) != 4 or t[0] != "BOND" or t[3] not in ("R", "F"):
            raise LigandRecordError(f"expected BOND line, got {line!r}", lineno, lig_id)
        try:
            bonds.append(Bond(int(t[1]), int(t[2]), t[3] == "R"))
        except ValueError:
            raise LigandRecordError(f"non-numeric token in {line!r}", lineno, lig_id) from None
    try:
        return Ligand(lig_id, tuple(atoms), tuple(bonds))
    except MoleculeError as exc:
        msg = str(exc).split(": ", 1)[-1]
        raise LigandRecordError(msg, header_no, lig_id) from None


def parse_ligands(text, errors: str = "raise") -> Iterator[Ligand | LigandRecordError]:
    """Stream ligands from ``text`` (a string or an iterable of lines).

    ``errors`` selects what happens to a bad record: ``"raise"`` stops,
    ``"skip"`` drops it, ``"yield"`` passes the :class:`LigandRecordError`
    down the stream so a consumer can log it.
    """
    if errors not in ("raise", "skip", "yield"):
        raise ValueError(f"unknown errors mode {errors!r}")
    buffered = deque()
    lines = _lines(text)

    def pull():
        if buffered:
            return buffered.popleft()
        return next(lines, None)

    class _Reader:
        def __iter__(self):
            return self

        def __next__(self):
            item = pull()
            if item is None or item[1].startswith("LIGAND"):
                if item is not None:
                    buffered.appendleft(item)
                raise StopIteration
            return item

    while True:
        item = pull()
        if item is None:
            return
        lineno, line = item
        tokens = line.split()
        if tokens[0] != "LIGAND":
            exc = LigandRecordError(f"expected LIGAND header, got {line!r}", lineno)
        else:
            try:
                yield _read_record(lineno, tokens, iter(_Reader()))
                continue
            except LigandRecordError as err:
                exc = err
        if errors == "raise":
            raise exc
        # resynchronise on the next header
        for _ in _Reader():
            pass
        if errors == "yield":
            yield exc


def render_ligand(ligand: Ligand) -> str:
    rows = [f"LIGAND {ligand.id} {ligand.n_atoms} {len(ligand.bonds)}"]
    for a in ligand.atoms:
        x, y, z = (repr(float(v)) for v in a.position)
        rows.append(f"ATOM {a.index} {x} {y} {z} {float(a.radius)!r}")
    for b in ligand.bonds:
        rows.append(f"BOND {b.a} {b.b} {'R' if b.rotatable else 'F'}")
    return "\n".join(rows) + "\n"


def render_ligands(ligands: Iterable[Ligand]) -> str:
    return "".join(render_ligand(lig) for lig in ligands)


# -- synthetic data ----------------------------------------------------------

GROUP_SIZES = (3, 6)
BOND_LENGTH = (1.3, 1.6)
RADIUS = (1.2, 1.9)
#: Extra clearance (angstrom) between generated atoms that the bump check compares.
CLEARANCE = 0.1


@dataclass(frozen=True)
class DatasetSpec:
    """Parameters of a synthetic ligand database and its pocket.

    Default ranges span 28-153 atoms and 2-53 rotamers. Each ligand is a
    random tree of rigid 3-6 atom groups, so a ligand with ``r`` rotamers
    holds between ``3 (r + 1)`` and ``6 (r + 1)`` atoms; combinations outside
    that band are never drawn.
    """

    ligand_count: int = 100
    atom_range: tuple[int, int] = (28, 153)
    rotamer_range: tuple[int, int] = (2, 53)
    seed: int = 0
    pocket_points: int = 120
    pocket_id: str = "pocket"
    id_prefix: str = "L"

    def feasible_rotamers(self) -> list[int]:
        amin, amax = self.atom_range
        rmin, rmax = self.rotamer_range
        return [r for r in range(rmin, rmax + 1)
                if max(amin, 3 * (r + 1)) <= min(amax, 6 * (r + 1))]

    def validate(self):
        amin, amax = self.atom_range
        rmin, rmax = self.rotamer_range
        if self.ligand_count < 0:
            raise ValueError("ligand_count must be >= 0")
        if amin < 2 or amax < amin:
            raise ValueError(f"bad atom_range {self.atom_range}")
        if rmin < 0 or rmax < rmin:
            raise ValueError(f"bad rotamer_range {self.rotamer_range}")
        if rmin > amax - 1:
            raise ValueError(f"infeasible spec: {rmin} rotamers need more than {amax} atoms")
        if not self.feasible_rotamers():
            raise ValueError(
                f"infeasible spec: no rotamer count in {self.rotamer_range} fits "
                f"{self.atom_range} atoms with 3-6 atom groups")
        if self.pocket_points < 1:
            raise ValueError("pocket_points must be >= 1")


def _random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _group_shape(rng, size, bond):
    """Local coordinates of a rigid group; atom 0 at the origin."""
    if size >= 5 and rng.random() < 0.5:
        # regular ring with side ``bond``
        radius = bond / (2 * math.sin(math.pi / size))
        ang = 2 * math.pi * np.arange(size) / size
        pts = np.stack([radius * np.cos(ang) - radius, radius * np.sin(ang), np.zeros(size)], axis=1)
        bonds = [(k, k + 1) for k in range(size - 1)] + [(size - 1, 0)]
        return pts, bonds, True
    pts = [np.zeros(3)]
    prev_dir = np.array([1.0, 0.0, 0.0])
    for _ in range(size - 1):
        for _ in range(50):
            d = _random_unit(rng)
            if np.dot(d, prev_dir) > 0.2:
                break
        pts.append(pts[-1] + bond * d)
        prev_dir = d
    bonds = [(k, k + 1) for k in range(size - 1)]
    return np.array(pts), bonds, False


def _group_distances(size, ring):
    k = np.arange(size)
    diff = np.abs(k[:, None] - k[None, :])
    return np.minimum(diff, size - diff) if ring else diff


def _random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def _pick_parent(rng, open_atoms, pos, centre):
    """Random open atom from the outer half of the growing molecule."""
    dist = np.linalg.norm(pos[open_atoms] - centre, axis=1)
    order = np.argsort(-dist, kind="stable")
    outer = order[: max(1, (len(order) + 1) // 2)]
    return open_atoms[int(outer[rng.integers(len(outer))])]


def _aligning_rotation(rng, local, direction):
    """Rotation taking the group's centroid direction onto ``direction``, random spin."""
    c = local.mean(axis=0)
    n = np.linalg.norm(c)
    if n < 1e-9:
        return _random_rotation(rng)
    a = c / n
    v = np.cross(a, direction)
    s, cth = np.linalg.norm(v), float(np.dot(a, direction))
    if s < 1e-12:
        align = np.eye(3) if cth > 0 else -np.eye(3)
    else:
        k = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
        align = np.eye(3) + k + k @ k * ((1 - cth) / (s * s))
    phi = rng.uniform(0, 2 * math.pi)
    d = direction
    kd = np.array([[0, -d[2], d[1]], [d[2], 0, -d[0]], [-d[1], d[0], 0]])
    spin = np.eye(3) + math.sin(phi) * kd + (1 - math.cos(phi)) * kd @ kd
    return spin @ align


def _graph_distances_from(adjacency, source, n):
    dist = np.full(n, -1)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _try_build(rng, n_atoms, n_rot, attempts=300):
    n_groups = n_rot + 1
    sizes = np.full(n_groups, GROUP_SIZES[0])
    extra = n_atoms - sizes.sum()
    while extra > 0:
        g = rng.integers(n_groups)
        if sizes[g] < GROUP_SIZES[1]:
            sizes[g] += 1
            extra -= 1
    radii = rng.uniform(*RADIUS, size=n_atoms)
    pos = np.zeros((n_atoms, 3))
    bonds: list[tuple[int, int, bool]] = []
    adjacency: list[list[int]] = [[] for _ in range(n_atoms)]
    placed = 0
    for g in range(n_groups):
        size = int(sizes[g])
        new_r = radii[placed:placed + size]
        intra_lim = 0.8 * (new_r[:, None] + new_r[None, :]) + CLEARANCE
        inter_lim = 0.8 * (new_r[:, None] + radii[None, :placed]) + CLEARANCE
        open_atoms = [a for a in range(placed) if len(adjacency[a]) < 3]
        if g > 0 and not open_atoms:
            return None
        centre = pos[:placed].mean(axis=0) if placed else None
        for _ in range(attempts):
            if g > 0:
                parent = _pick_parent(rng, open_atoms, pos, centre)
                outward = pos[parent] - centre
                norm = np.linalg.norm(outward)
                outward = outward / norm if norm > 1e-9 else _random_unit(rng)
                bonded = [(pos[v] - pos[parent]) / np.linalg.norm(pos[v] - pos[parent])
                          for v in adjacency[parent]]
                direction = outward - sum(bonded, np.zeros(3)) + 0.8 * _random_unit(rng)
                direction /= np.linalg.norm(direction)
                if np.dot(direction, outward) < 0.3 or any(np.dot(direction, u) > -0.2 for u in bonded):
                    continue
            bond_len = rng.uniform(*BOND_LENGTH)
            local, local_bonds, ring = _group_shape(rng, size, bond_len)
            gdist = _group_distances(size, ring)
            d = np.linalg.norm(local[:, None, :] - local[None, :, :], axis=2)
            if np.any((gdist >= BUMP_BONDS) & (d < intra_lim)):
                continue
            if g == 0:
                parent = None
                coords = local @ _random_rotation(rng).T
                break
            link = rng.uniform(*BOND_LENGTH)
            coords = pos[parent] + link * direction + local @ _aligning_rotation(rng, local, direction).T
            pd = _graph_distances_from(adjacency, parent, placed)
            gd = gdist[:, 0][:, None] + 1 + pd[None, :]
            d = np.linalg.norm(coords[:, None, :] - pos[None, :placed, :], axis=2)
            if not np.any((gd >= BUMP_BONDS) & (d < inter_lim)):
                break
        else:
            return None
        pos[placed:placed + size] = coords
        for a, b in local_bonds:
            bonds.append((placed + a, placed + b, False))
            adjacency[placed + a].append(placed + b)
            adjacency[placed + b].append(placed + a)
        if parent is not None:
            bonds.append((parent, placed, True))
            adjacency[parent].append(placed)
            adjacency[placed].append(parent)
        placed += size
    return pos, radii, bonds


def synthetic_ligand(rng, lig_id, n_atoms, n_rot, centre=(0.0, 0.0, 0.0)) -> Ligand:
    """One random tree of rigid groups with exactly ``n_rot`` rotatable bridges.

    Raises
    ------
    ValueError
        If ``n_atoms`` cannot be split into ``n_rot + 1`` groups of 3-6 atoms.
    """
    lo, hi = GROUP_SIZES
    if not lo * (n_rot + 1) <= n_atoms <= hi * (n_rot + 1):
        raise ValueError(f"{n_atoms} atoms cannot form {n_rot + 1} groups of {lo}-{hi} atoms")
    while True:
        built = _try_build(rng, n_atoms, n_rot)
        if built is not None:
            break
    pos, radii, bonds = built
    pos = pos - pos.mean(axis=0) + np.asarray(centre)
    atoms = tuple(Atom(i, tuple(float(c) for c in p), float(r))
                  for i, (p, r) in enumerate(zip(pos, radii)))
    return Ligand(lig_id, atoms, tuple(Bond(a, b, rot) for a, b, rot in bonds))


def synthetic_pocket(n_points: int, seed: int, pocket_id: str = "pocket") -> Pocket:
    """Points drawn uniformly inside an ellipsoidal cavity centred on the origin.

    The cavity volume grows with the point count so density stays fixed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    scale = (n_points / 80.0) ** (1.0 / 3.0)
    axes = np.array([6.0, 5.0, 4.0]) * scale
    pts = []
    while len(pts) < n_points:
        cand = rng.uniform(-1.0, 1.0, size=(2 * n_points, 3))
        inside = cand[(cand ** 2).sum(axis=1) <= 1.0]
        pts.extend(inside * axes)
    return Pocket(pocket_id, np.array(pts[:n_points]))


def iter_synthetic_ligands(spec: DatasetSpec) -> Iterator[Ligand]:
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    amin, amax = spec.atom_range
    choices = spec.feasible_rotamers()
    width = len(str(max(spec.ligand_count - 1, 0)))
    for k in range(spec.ligand_count):
        n_rot = int(choices[rng.integers(len(choices))])
        lo, hi = max(amin, 3 * (n_rot + 1)), min(amax, 6 * (n_rot + 1))
        n_atoms = int(rng.integers(lo, hi + 1))
        yield synthetic_ligand(rng, f"{spec.id_prefix}{k:0{max(width, 6)}d}", n_atoms, n_rot)


def generate_synthetic(spec: DatasetSpec) -> tuple[list[Ligand], Pocket]:
    """Seeded ligand database plus pocket; the same spec gives identical output."""
    spec.validate()
    ligands = list(iter_synthetic_ligands(spec))
    return ligands, synthetic_pocket(spec.pocket_points, spec.seed, spec.pocket_id)
