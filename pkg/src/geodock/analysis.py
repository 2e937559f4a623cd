"""Rotation profiles and peak statistics for individual fragments.

A rotation profile records the overlap score at every integer degree of one
fragment, holding the rest of the ligand fixed. Peaks are maximal circular
runs of valid angles that score above the midpoint between the minimum and
maximum of the profile. Their widths tell how coarse an angular search may
get before it starts missing the best rotation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _jit
from .geometry import GeometryError, PocketGrid
from .kernel import (BASELINE, COS_TABLE, SIN_TABLE, KnobConfig, _check_pose, _pocket_arrays,
                     _topology, evaluation_count, match_probes_shape, optimize_fragment_flat)
from .molecule import Fragment, Ligand, Pocket


class AnalysisError(ValueError):
    pass


@dataclass
class RotationProfile:
    """Overlap score per integer degree; ``scores`` is NaN where the pose bumps."""

    fragment: Fragment
    scores: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.scores.shape != (360,) or self.valid.shape != (360,):
            raise AnalysisError("a rotation profile holds exactly 360 entries")


@dataclass(frozen=True)
class Peak:
    start: int
    width: int
    height_ratio: float

    def angles(self) -> list[int]:
        return [(self.start + k) % 360 for k in range(self.width)]


@dataclass
class PeakStats:
    delta_overlap: float
    peaks: list[Peak] = field(default_factory=list)
    best_peak_width: int = 0

    @property
    def n_peaks(self) -> int:
        return len(self.peaks)


def rotation_profile(pose, ligand: Ligand, fragment: Fragment, pocket: Pocket,
                     index: PocketGrid | None = None) -> RotationProfile:
    """Score ``fragment`` at every degree about its rotamer bond.

    Angles are relative to ``pose``, which is left untouched. Angle 0 is the
    input pose itself and is always valid.
    """
    pose = np.array(pose, dtype=np.float64, order="C")
    _check_pose(pose, ligand)
    topo = _topology(ligand)
    rot = next(k for k, pair in enumerate(ligand.fragments) if pair[0].rotamer.key == fragment.rotamer.key)
    lo, hi = topo.bump_ptr[rot], topo.bump_ptr[rot + 1]
    anchor, pivot = pose[fragment.anchor], pose[fragment.pivot]
    if math.dist(anchor, pivot) < 1e-9:
        raise GeometryError(f"degenerate rotation axis for rotamer {fragment.rotamer.key}")
    scores = np.empty(360)
    valid = np.empty(360, dtype=np.bool_)
    _jit.profile(pose, fragment.indices, fragment.anchor, fragment.pivot,
                 topo.bump_i[lo:hi], topo.bump_j[lo:hi], topo.bump_lim[lo:hi],
                 _pocket_arrays(pocket, index), COS_TABLE, SIN_TABLE, scores, valid)
    scores[~valid] = np.nan
    return RotationProfile(fragment, scores, valid)


def detect_peaks(profile: RotationProfile) -> PeakStats:
    """Find the peaks of a rotation profile.

    The cut-off is ``min + delta / 2`` over the valid scores, compared with
    a strict inequality. Runs are circular, so a run crossing 359 -> 0 is
    one peak that starts at its lowest angle before the wrap.

    Raises
    ------
    AnalysisError
        If no angle is valid.
    """
    valid = np.asarray(profile.valid, dtype=bool)
    if not valid.any():
        raise AnalysisError("no feasible rotation")
    scores = np.asarray(profile.scores, dtype=np.float64)
    lo = float(scores[valid].min())
    hi = float(scores[valid].max())
    delta = hi - lo
    if delta == 0.0:
        return PeakStats(0.0)
    cut = lo + 0.5 * delta
    above = valid & (np.where(valid, scores, -np.inf) > cut)
    if above.all():
        runs = [(0, 360)]
    else:
        # rolling so that index 0 is a gap makes every run contiguous
        shift = int(np.flatnonzero(~above)[0])
        rolled = np.roll(above, -shift)
        edges = np.diff(np.concatenate([[0], rolled.astype(np.int8), [0]]))
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        runs = sorted(((int(s) + shift) % 360, int(e - s)) for s, e in zip(starts, ends))
    peaks = []
    best_width = 0
    arg_best = int(np.nanargmax(np.where(valid, scores, np.nan)))
    for start, width in runs:
        idx = [(start + k) % 360 for k in range(width)]
        top = float(scores[idx].max())
        peaks.append(Peak(start, width, (top - lo) / delta))
        if arg_best in idx:
            best_width = width
    return PeakStats(delta, peaks, best_width)


def tile_hit_probability(dataset: Sequence[PeakStats], tile_sizes: Iterable[int],
                         high_precision_step: int = 1):
    """Fraction of fragments whose best peak is wider than each tile size.

    Returns
    -------
    list of tuple
        ``(tile_size, probability, evaluations)`` where ``evaluations`` is
        the number of rotations the tiled search scores at that tile size.
    """
    if not dataset:
        raise AnalysisError("empty dataset")
    widths = np.array([s.best_peak_width for s in dataset])
    return [(int(t), float(np.mean(widths > t)), evaluation_count(t, high_precision_step))
            for t in tile_sizes]


@dataclass(frozen=True)
class FragmentRecord:
    """Peak statistics of one fragment as seen by the first docking sweep."""

    ligand_id: str
    rotamer: tuple[int, int]
    side: str
    relative_size: float
    delta_overlap: float
    final_score: float
    n_peaks: int
    best_peak_width: int

    @property
    def normalized_delta(self) -> float:
        return self.delta_overlap / self.final_score


def analyze_ligand(ligand: Ligand, pocket: Pocket, config: KnobConfig = BASELINE,
                   index: PocketGrid | None = None) -> list[FragmentRecord]:
    """Profile every fragment in kernel order during one exhaustive sweep.

    Each fragment is profiled from the pose the kernel would hand it (all
    earlier fragments already committed at 1 degree resolution). Deltas are
    later normalised by the score ``config`` reaches on the whole ligand.
    """
    final = match_probes_shape(ligand, pocket, config=config, index=index).score
    pose = np.array(ligand.positions, dtype=np.float64, order="C")
    records = []
    for left, right in ligand.fragments:
        for frag in (left, right):
            stats = detect_peaks(rotation_profile(pose, ligand, frag, pocket, index))
            records.append(FragmentRecord(ligand.id, frag.rotamer.key, frag.side, frag.relative_size,
                                          stats.delta_overlap, final, stats.n_peaks,
                                          stats.best_peak_width))
            optimize_fragment_flat(pose, ligand, frag, pocket, 1, index)
    return records


def analyze_dataset(ligands: Iterable[Ligand], pocket: Pocket, config: KnobConfig = BASELINE,
                    index: PocketGrid | None = None) -> list[FragmentRecord]:
    out = []
    for lig in ligands:
        out.extend(analyze_ligand(lig, pocket, config, index))
    return out


FRAGMENT_COLUMNS = ("ligand_id", "rotamer", "side", "relative_size", "delta_overlap",
                    "normalized_delta", "n_peaks", "best_peak_width")
BIN_COLUMNS = ("bin_low", "bin_high", "fragments", "mean_normalized_delta", "mean_peaks",
               "mean_best_peak_width")


def _write(rows, header):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def fragments_csv(records: Sequence[FragmentRecord]) -> str:
    return _write(([r.ligand_id, f"{r.rotamer[0]}-{r.rotamer[1]}", r.side, repr(r.relative_size),
                    repr(r.delta_overlap), repr(r.normalized_delta), r.n_peaks, r.best_peak_width]
                   for r in records), FRAGMENT_COLUMNS)


def binned_rows(records: Sequence[FragmentRecord], bins: int = 10):
    """Average statistics per relative-size bin; empty bins are dropped."""
    edges = np.arange(bins + 1) / bins
    sizes = np.array([r.relative_size for r in records])
    rows = []
    for k in range(bins):
        # the last bin is closed on the right so relative sizes near 1 land somewhere
        upper = sizes <= edges[k + 1] if k == bins - 1 else sizes < edges[k + 1]
        members = [r for r, m in zip(records, (sizes >= edges[k]) & upper) if m]
        if not members:
            continue
        rows.append((float(edges[k]), float(edges[k + 1]), len(members),
                     float(np.mean([r.normalized_delta for r in members])),
                     float(np.mean([r.n_peaks for r in members])),
                     float(np.mean([r.best_peak_width for r in members]))))
    return rows


def binned_csv(records: Sequence[FragmentRecord], bins: int = 10) -> str:
    return _write(([repr(v) if isinstance(v, float) else v for v in row]
                   for row in binned_rows(records, bins)), BIN_COLUMNS)


def tile_csv(rows) -> str:
    return _write(((t, repr(p), repr(e)) for t, p, e in rows),
                  ("tile_size", "probability", "evaluations"))
