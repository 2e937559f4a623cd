"""Overlap scoring, fragment rotation and internal-bump checks.

These are the reference (numpy) implementations. The docking kernel runs
compiled copies of the same arithmetic in :mod:`geodock._jit`; both evaluate
every expression in the same order so their results agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .molecule import Fragment, Ligand, Pocket, Rotamer

#: Lower clamp on each atom's squared distance to the pocket, in square angstrom.
EPSILON = 1e-12
#: Two atoms bump when closer than this fraction of their summed radii.
BUMP_FACTOR = 0.8
#: Atom pairs fewer bonds apart than this are never checked for bumps.
BUMP_MIN_BONDS = 4
#: Rotation axes shorter than this are rejected.
MIN_AXIS_LENGTH = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate geometry, such as a zero-length rotation axis."""


def rodrigues_matrix(kx, ky, kz, c, s):
    """Rotation matrix about unit axis ``(kx, ky, kz)`` given ``cos`` and ``sin``.

    Plain scalar code so that it compiles unchanged under numba.
    """
    t = 1.0 - c
    return (
        c + kx * kx * t, kx * ky * t - kz * s, kx * kz * t + ky * s,
        ky * kx * t + kz * s, c + ky * ky * t, ky * kz * t - kx * s,
        kz * kx * t - ky * s, kz * ky * t + kx * s, c + kz * kz * t,
    )


def cos_sin_degrees(angle):
    rad = math.radians(angle)
    return math.cos(rad), math.sin(rad)


def angle_tables():
    """cos/sin of every integer degree in [0, 360), computed once."""
    cs = np.array([cos_sin_degrees(d) for d in range(360)], dtype=np.float64)
    return np.ascontiguousarray(cs[:, 0]), np.ascontiguousarray(cs[:, 1])


def axis_unit(pose, anchor, pivot):
    ox, oy, oz = (float(v) for v in pose[anchor])
    ax = float(pose[pivot, 0]) - ox
    ay = float(pose[pivot, 1]) - oy
    az = float(pose[pivot, 2]) - oz
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    if norm < MIN_AXIS_LENGTH:
        raise GeometryError(f"degenerate rotation axis between atoms {anchor} and {pivot}")
    return (ox, oy, oz), (ax / norm, ay / norm, az / norm)


def rotate_fragment(pose: np.ndarray, ligand: Ligand, fragment: Fragment, angle: float) -> np.ndarray:
    """Rotate the atoms of ``fragment`` by ``angle`` degrees about its rotamer bond.

    The axis is directed from the fragment's own endpoint to the opposite one
    and the rotation follows the right-hand rule. A new pose is returned; the
    input is not modified. Multiples of 360 degrees return an exact copy.
    """
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (ligand.n_atoms, 3):
        raise GeometryError(f"pose shape {pose.shape} does not match {ligand.n_atoms} atoms")
    (ox, oy, oz), (kx, ky, kz) = axis_unit(pose, fragment.anchor, fragment.pivot)
    out = pose.copy()
    if angle % 360 == 0:
        return out
    c, s = cos_sin_degrees(angle)
    r00, r01, r02, r10, r11, r12, r20, r21, r22 = rodrigues_matrix(kx, ky, kz, c, s)
    idx = fragment.indices
    dx = pose[idx, 0] - ox
    dy = pose[idx, 1] - oy
    dz = pose[idx, 2] - oz
    out[idx, 0] = ox + (r00 * dx + r01 * dy + r02 * dz)
    out[idx, 1] = oy + (r10 * dx + r11 * dy + r12 * dz)
    out[idx, 2] = oz + (r20 * dx + r21 * dy + r22 * dz)
    return out


def min_sq_distances(positions: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Brute-force squared distance from each position to its nearest point."""
    positions = np.asarray(positions, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    dx = positions[:, None, 0] - points[None, :, 0]
    dy = positions[:, None, 1] - points[None, :, 1]
    dz = positions[:, None, 2] - points[None, :, 2]
    return (dx * dx + dy * dy + dz * dz).min(axis=1)


def overlap_from_sq_distances(min_d2: np.ndarray) -> float:
    """Atom count over the clamped sum, summed in ascending atom order."""
    clamped = np.maximum(np.asarray(min_d2, dtype=np.float64), EPSILON)
    total = np.cumsum(clamped)[-1]
    return float(len(clamped) / total)


def overlap_score(pose: np.ndarray, pocket: Pocket, index: PocketGrid | None = None) -> float:
    """Geometric overlap between a ligand pose and a pocket.

    Parameters
    ----------
    pose : ndarray, shape (l, 3)
        Atom positions.
    pocket : Pocket
        Pocket point cloud.
    index : PocketGrid, optional
        Spatial index over ``pocket.points``. Gives the same minima as the
        brute-force search, only faster on large pockets.

    Returns
    -------
    float
        ``l / sum_i max(eps, min_j d^2(atom_i, point_j))``. Higher is better.
    """
    pose = np.asarray(pose, dtype=np.float64)
    if index is None:
        d2 = min_sq_distances(pose, pocket.points)
    else:
        d2 = index.min_sq_distances(pose)
    return overlap_from_sq_distances(d2)


@dataclass(frozen=True)
class BumpPairs:
    """Cross-fragment atom pairs that can collide when a rotamer turns."""

    i: np.ndarray
    j: np.ndarray
    limit_sq: np.ndarray


def bump_pairs(ligand: Ligand, rotamer: Rotamer) -> BumpPairs:
    """Pairs (left atom, right atom) at least ``BUMP_MIN_BONDS`` bonds apart.

    Results are cached on the ligand.
    """
    cache = ligand.__dict__.setdefault("_bump_pairs", {})
    hit = cache.get(rotamer.key)
    if hit is not None:
        return hit
    left, right = next(f for f in ligand.fragments if f[0].rotamer.key == rotamer.key)
    li, ri = left.indices, right.indices
    gd = ligand.graph_distances[np.ix_(li, ri)]
    a, b = np.nonzero(gd >= BUMP_MIN_BONDS)
    i, j = li[a], ri[b]
    limit = BUMP_FACTOR * (ligand.radii[i] + ligand.radii[j])
    pairs = BumpPairs(
        np.ascontiguousarray(i, dtype=np.int64),
        np.ascontiguousarray(j, dtype=np.int64),
        np.ascontiguousarray(limit * limit),
    )
    cache[rotamer.key] = pairs
    return pairs


def check_bumps(pose: np.ndarray, ligand: Ligand, fragment: Fragment) -> bool:
    """True when no cross-fragment pair of ``fragment``'s rotamer collides."""
    pairs = bump_pairs(ligand, fragment.rotamer)
    if len(pairs.i) == 0:
        return True
    pose = np.asarray(pose, dtype=np.float64)
    pi, pj = pose[pairs.i], pose[pairs.j]
    dx = pi[:, 0] - pj[:, 0]
    dy = pi[:, 1] - pj[:, 1]
    dz = pi[:, 2] - pj[:, 2]
    d2 = dx * dx + dy * dy + dz * dz
    return not bool(np.any(d2 < pairs.limit_sq))


class PocketGrid:
    """Uniform-grid nearest-point index over a pocket.

    Every cell stores the pocket points that can be nearest to some position
    inside it: with ``c`` the cell centre, ``h`` the half diagonal and ``d``
    the distance from ``c`` to its nearest point, the nearest point of any
    position in the cell lies within ``d + 2h`` of ``c``. A query scans only
    its cell's list with the same arithmetic as the brute-force search, so
    the minima are bit-identical. Positions outside the padded box fall back
    to brute force.
    """

    def __init__(self, points, cell: float = 0.5, margin: float = 10.0):
        self.points = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        if cell <= 0 or margin < 0:
            raise ValueError("cell must be positive and margin non-negative")
        self.cell = float(cell)
        self.origin = self.points.min(axis=0) - margin
        span = self.points.max(axis=0) + margin - self.origin
        self.shape = np.maximum(1, np.ceil(span / self.cell).astype(np.int64))
        nx, ny, nz = (int(v) for v in self.shape)
        gx, gy, gz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        centres = self.origin + (np.stack([gx, gy, gz], axis=-1).reshape(-1, 3) + 0.5) * self.cell
        tree = cKDTree(self.points)
        nearest, _ = tree.query(centres)
        # slack absorbs rounding in the cell lookup
        reach = nearest + self.cell * math.sqrt(3.0) + 1e-6
        members = tree.query_ball_point(centres, reach, return_sorted=True)
        counts = np.fromiter((len(m) for m in members), dtype=np.int64, count=len(members))
        # 32-bit tables halve the index's cache footprint
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.candidates = np.fromiter((i for m in members for i in m), dtype=np.int32,
                                      count=int(self.offsets[-1]))

    def cell_of(self, position):
        key = np.floor((np.asarray(position, dtype=np.float64) - self.origin) / self.cell).astype(np.int64)
        if np.any(key < 0) or np.any(key >= self.shape):
            return -1
        return int((key[0] * self.shape[1] + key[1]) * self.shape[2] + key[2])

    def min_sq_distances(self, positions) -> np.ndarray:
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        out = np.empty(len(positions))
        for n, pos in enumerate(positions):
            c = self.cell_of(pos)
            if c < 0:
                pts = self.points
            else:
                pts = self.points[self.candidates[self.offsets[c]:self.offsets[c + 1]]]
            out[n] = min_sq_distances(pos[None, :], pts)[0]
        return out
