import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geodock.geometry import PocketGrid
from geodock.io import DatasetSpec, generate_synthetic, parse_ligands, render_ligands
from geodock.kernel import BASELINE, KnobConfig, match_probes_shape
from geodock.screening import (LigandResult, ScreeningError, ScreeningReport, Skipped,
                               overlap_degradation, parse_report, render_report_csv,
                               render_summary, screen)

FAST = KnobConfig(5, 45, 0.3, 1, True)


def report(scores, pocket="p", config=BASELINE, wall=1.0):
    rows = [LigandResult(f"L{k:03d}", float(s), 10, 0.01, 20) for k, s in enumerate(scores)]
    return ScreeningReport(pocket, config, rows, wall)


@pytest.fixture(scope="module")
def hundred():
    return generate_synthetic(DatasetSpec(100, (10, 24), (2, 3), seed=21, pocket_points=60))


def test_worker_count_does_not_change_scores(hundred):
    ligands, pk = hundred
    one = screen(pk, ligands, FAST, workers=1)
    eight = screen(pk, reversed(ligands), FAST, workers=8)
    assert [(r.ligand_id, r.score, r.evaluations) for r in one.per_ligand] == \
           [(r.ligand_id, r.score, r.evaluations) for r in eight.per_ligand]
    assert one.top1pct_mean == eight.top1pct_mean
    assert [r.ligand_id for r in one.per_ligand] == sorted(lig.id for lig in ligands)


def test_report_matches_direct_kernel_calls(hundred):
    ligands, pk = hundred
    rep = screen(pk, ligands[:10], FAST, workers=2, index=PocketGrid(pk.points))
    for lig, row in zip(ligands[:10], rep.per_ligand):
        res = match_probes_shape(lig, pk, config=FAST)
        assert (row.ligand_id, row.score, row.evaluations, row.atoms) == \
               (lig.id, res.score, res.evaluations, lig.n_atoms)
        assert row.time > 0
    assert rep.total_atoms == sum(lig.n_atoms for lig in ligands[:10])
    assert rep.throughput == rep.total_atoms / rep.wall_time


def test_top_one_percent_of_hundred_is_the_max():
    rep = report(range(100))
    assert rep.top1pct_mean == 99.0


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=400))
def test_top_one_percent_uses_ceiling(scores):
    k = max(1, math.ceil(len(scores) / 100))
    assert report(scores).top1pct_mean == pytest.approx(np.mean(sorted(scores)[-k:]), rel=1e-12)


def test_empty_database():
    rep = screen(generate_synthetic(DatasetSpec(0, pocket_points=5))[1], [], BASELINE)
    assert rep.per_ligand == [] and rep.throughput == 0.0 and rep.total_atoms == 0


@pytest.mark.parametrize("approx, expected", [(1.0, 0.0), (0.9, 10.0), (1.1, -10.0)])
def test_degradation_examples(approx, expected):
    assert overlap_degradation(report([approx]), report([1.0])) == pytest.approx(expected, abs=1e-12)


def test_degenerate_baseline():
    with pytest.raises(ScreeningError, match="degenerate baseline"):
        overlap_degradation(report([0.0]), report([0.0]))


def test_degradation_needs_matching_inputs():
    with pytest.raises(ScreeningError, match="different pockets"):
        overlap_degradation(report([1.0], pocket="a"), report([1.0], pocket="b"))
    with pytest.raises(ScreeningError, match="different ligand sets"):
        overlap_degradation(report([1.0, 2.0]), report([1.0]))


def test_bad_records_are_skipped_and_counted(hundred):
    ligands, pk = hundred
    bad = "LIGAND broken 2 1\nATOM 0 0 0 0 1\nATOM 1 1 0 0 1\nBOND 0 0 R\n"
    text = render_ligands(ligands[:3]) + bad + render_ligands(ligands[3:5]) + "LIGAND\n"
    stream = list(parse_ligands(text, errors="yield"))
    rep = screen(pk, stream, FAST, workers=3)
    assert len(rep.per_ligand) + len(rep.skipped) == len(stream) == 7
    assert rep.skipped[0].ligand_id == "broken" and "self-bond" in rep.skipped[0].reason
    assert rep.skipped[1].ligand_id is None


def test_invalid_worker_count():
    with pytest.raises(ScreeningError):
        screen(None, [], workers=0)


def test_report_files_round_trip(hundred):
    ligands, pk = hundred
    rep = screen(pk, ligands[:6], KnobConfig(2, 90, 0.6, 2, False), workers=2)
    rep.skipped.append(Skipped("x", "bad record at line 4"))
    csv_text, summary = render_report_csv(rep), render_summary(rep)
    assert csv_text.startswith("ligand_id,score,evaluations,time,atoms\n")
    assert "threshold=0.6\n" in summary and "refinement=false\n" in summary
    back = parse_report(csv_text, summary)
    assert back == rep
    assert back.throughput == rep.throughput and back.top1pct_mean == rep.top1pct_mean


def test_summary_must_be_key_value():
    with pytest.raises(ScreeningError, match="key=value"):
        parse_report("ligand_id,score,evaluations,time,atoms\n", "pocket_id\n")
