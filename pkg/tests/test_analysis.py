import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from geodock.analysis import (AnalysisError, PeakStats, RotationProfile, analyze_dataset,
                              analyze_ligand, binned_csv, binned_rows, detect_peaks,
                              fragments_csv, rotation_profile, tile_csv, tile_hit_probability)
from geodock.geometry import overlap_score, rotate_fragment
from geodock.io import synthetic_ligand
from geodock.kernel import BASELINE, match_probes_shape
from geodock.molecule import Pocket, make_ligand


def profile(scores, valid=None):
    scores = np.asarray(scores, dtype=float)
    valid = np.ones(360, bool) if valid is None else np.asarray(valid, bool)
    return RotationProfile(None, np.where(valid, scores, np.nan), valid)


# -- detect_peaks -------------------------------------------------------------

def test_single_two_degree_peak():
    s = np.zeros(360)
    s[2:4] = 1.0
    stats = detect_peaks(profile(s))
    assert stats.delta_overlap == 1.0 and stats.n_peaks == 1
    (peak,) = stats.peaks
    assert (peak.start, peak.width, peak.height_ratio) == (2, 2, 1.0)
    assert stats.best_peak_width == 2


def test_constant_curve_has_no_peaks():
    stats = detect_peaks(profile(np.full(360, 3.5)))
    assert stats.delta_overlap == 0.0 and stats.peaks == [] and stats.best_peak_width == 0


def test_runs_across_zero_merge():
    s = np.zeros(360)
    s[[358, 359, 0, 1]] = 1.0
    (peak,) = detect_peaks(profile(s)).peaks
    assert (peak.start, peak.width) == (358, 4)
    assert peak.angles() == [358, 359, 0, 1]


def test_threshold_is_strict():
    s = np.zeros(360)
    s[10] = 2.0
    s[11] = 1.0  # exactly half of delta is not above the cut
    assert [p.width for p in detect_peaks(profile(s)).peaks] == [1]


def test_invalid_angles_split_peaks_and_are_ignored():
    s = np.zeros(360)
    s[20:30] = 1.0
    s[25] = 100.0
    valid = np.ones(360, bool)
    valid[25] = False
    stats = detect_peaks(profile(s, valid))
    assert stats.delta_overlap == 1.0
    assert [(p.start, p.width) for p in stats.peaks] == [(20, 5), (26, 4)]
    assert stats.best_peak_width == 5


def test_height_ratio_of_secondary_peak():
    s = np.zeros(360)
    s[100] = 4.0
    s[200] = 3.0
    peaks = detect_peaks(profile(s)).peaks
    assert [p.height_ratio for p in peaks] == [1.0, 0.75]


def test_all_invalid_profile():
    with pytest.raises(AnalysisError, match="no feasible rotation"):
        detect_peaks(profile(np.zeros(360), np.zeros(360, bool)))


def test_profile_must_have_360_entries():
    with pytest.raises(AnalysisError):
        RotationProfile(None, np.zeros(359), np.ones(359, bool))


curves = st.lists(st.integers(0, 6), min_size=360, max_size=360)
masks = st.lists(st.booleans(), min_size=360, max_size=360)


@given(curves, masks, st.integers(-1000, 1000))
def test_peak_properties(values, mask, shift):
    valid = np.array(mask)
    valid[int(np.argmax(values))] = True
    base = detect_peaks(profile(values, valid))
    moved = detect_peaks(profile(np.array(values) + shift, valid))
    assert moved.delta_overlap == base.delta_overlap
    assert moved.peaks == base.peaks and moved.best_peak_width == base.best_peak_width
    assert sum(p.width for p in base.peaks) <= 360
    covered = [a for p in base.peaks for a in p.angles()]
    assert len(covered) == len(set(covered))
    for p in base.peaks:
        assert p.width >= 1 and 0.0 <= p.height_ratio <= 1.0
        assert all(valid[a] for a in p.angles())
    if base.delta_overlap > 0:
        best = int(np.nanargmax(np.where(valid, values, np.nan)))
        assert sum(best in p.angles() for p in base.peaks) == 1


# -- tile_hit_probability -----------------------------------------------------

def test_tile_probability_examples():
    data = [PeakStats(1.0, [], 68)] * 5
    rows = tile_hit_probability(data, [18, 90])
    assert rows == [(18, 1.0, 38.0), (90, 0.0, 94.0)]
    assert tile_hit_probability(data, []) == []


def test_tile_probability_needs_data():
    with pytest.raises(AnalysisError):
        tile_hit_probability([], [18])


@given(st.lists(st.integers(0, 360), min_size=1, max_size=40))
def test_tile_probability_is_non_increasing(widths):
    data = [PeakStats(1.0, [], w) for w in widths]
    probs = [p for _, p, _ in tile_hit_probability(data, [1, 2, 5, 10, 18, 30, 45, 90, 180, 360])]
    assert all(a >= b for a, b in zip(probs, probs[1:]))


# -- rotation_profile ---------------------------------------------------------

def test_lone_fragment_far_from_everything_is_always_valid():
    lig = make_ligand("two", [(0, 0, 0), (0, 0, 1.5)], [1.5, 1.5], [(0, 1, True)])
    prof = rotation_profile(lig.positions, lig, lig.fragments[0][1], Pocket("p", [(5, 5, 5)]))
    assert prof.valid.all()


@pytest.mark.parametrize("seed", [0, 4])
def test_profile_matches_oracles(seed):
    # seed 4 gives a ligand with 106 bumping rotations across its fragments
    lig = synthetic_ligand(np.random.default_rng(seed), "b", 60, 15)
    pk = Pocket("p", np.random.default_rng(seed + 100).normal(scale=4.0, size=(50, 3)))
    bonds = [(b.a, b.b, b.rotatable) for b in lig.bonds]
    invalid = 0
    for pair in lig.fragments:
        for frag in pair:
            pose = np.array(lig.positions)
            prof = rotation_profile(pose, lig, frag, pk)
            assert np.array_equal(pose, lig.positions)
            assert prof.scores[0] == overlap_score(pose, pk)
            ok = oracles.feasible_angles(pose, lig.radii, bonds, frag.rotamer.key, frag.indices,
                                         frag.anchor, frag.pivot)
            assert np.array_equal(prof.valid, ok)
            invalid += 360 - int(ok.sum())
            scores = oracles.rotation_scores(pose, frag.indices, frag.anchor, frag.pivot, pk.points)
            assert np.array_equal(prof.scores[ok], scores[ok])
            assert np.isnan(prof.scores[~ok]).all()
    assert invalid == (106 if seed == 4 else 0)


def test_all_pairs_oracle_agrees_on_bumping_angles():
    lig = synthetic_ligand(np.random.default_rng(4), "b", 60, 15)
    bonds = [(b.a, b.b, b.rotatable) for b in lig.bonds]
    pk = Pocket("p", [(0, 0, 0)])
    for pair in lig.fragments:
        for frag in pair:
            prof = rotation_profile(lig.positions, lig, frag, pk)
            for a in np.flatnonzero(~prof.valid)[:3]:
                pose = rotate_fragment(lig.positions, lig, frag, int(a))
                assert not oracles.bump_oracle(pose, lig.radii, lig.n_atoms, bonds, frag.rotamer.key)


# -- dataset analysis ---------------------------------------------------------

def test_analyze_ligand_records_every_fragment(small_set):
    ligands, pk = small_set
    lig = ligands[0]
    records = analyze_ligand(lig, pk)
    assert len(records) == 2 * len(lig.rotamers)
    final = match_probes_shape(lig, pk, config=BASELINE).score
    for r in records:
        assert r.final_score == final and r.delta_overlap >= 0
        assert (r.best_peak_width == 0) == (r.n_peaks == 0)
        assert r.normalized_delta == r.delta_overlap / final
    assert [r.side for r in records[:2]] == ["left", "right"]


def test_csv_outputs(small_set):
    ligands, pk = small_set
    records = analyze_dataset(ligands[:3], pk)
    text = fragments_csv(records)
    lines = text.split("\n")
    assert lines[0] == ("ligand_id,rotamer,side,relative_size,delta_overlap,normalized_delta,"
                        "n_peaks,best_peak_width")
    assert len(lines) == len(records) + 2 and lines[-1] == ""
    rows = binned_rows(records, bins=4)
    assert sum(r[2] for r in rows) == len(records)
    assert binned_csv(records, bins=4).startswith("bin_low,bin_high,fragments,")
    assert tile_csv([(18, 0.5, 38.0)]) == "tile_size,probability,evaluations\n18,0.5,38.0\n"


def test_relative_size_one_lands_in_last_bin():
    from geodock.analysis import FragmentRecord
    recs = [FragmentRecord("x", (0, 1), "left", 1.0, 1.0, 2.0, 1, 5),
            FragmentRecord("x", (0, 1), "right", 0.0, 1.0, 2.0, 1, 5)]
    rows = binned_rows(recs, bins=10)
    assert [(r[0], r[2]) for r in rows] == [(0.0, 1), (0.9, 1)]
