"""Virtual screening of a ligand database against one pocket.

A master thread reads the ligand stream and feeds a queue; worker threads
pull ligands, dock them and send results back. The compiled kernel releases
the GIL, so workers run truly in parallel. Results are sorted by ligand id
at the end, which makes every report independent of scheduling.
"""

from __future__ import annotations

import math
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable

from .geometry import PocketGrid
from .io import LigandRecordError
from .kernel import BASELINE, KnobConfig, match_probes_shape
from .molecule import Ligand, MoleculeError, Pocket


class ScreeningError(ValueError):
    pass


@dataclass(frozen=True)
class LigandResult:
    ligand_id: str
    score: float
    evaluations: int
    time: float
    atoms: int


@dataclass(frozen=True)
class Skipped:
    ligand_id: str | None
    reason: str


@dataclass
class ScreeningReport:
    pocket_id: str
    config: KnobConfig
    per_ligand: list[LigandResult]
    wall_time: float
    skipped: list[Skipped] = field(default_factory=list)

    @property
    def total_atoms(self) -> int:
        return sum(r.atoms for r in self.per_ligand)

    @property
    def throughput(self) -> float:
        """Ligand atoms docked per second; 0 for an empty or instantaneous run."""
        if not self.per_ligand or self.wall_time <= 0:
            return 0.0
        return self.total_atoms / self.wall_time

    @property
    def top1pct_mean(self) -> float:
        """Mean of the best ``ceil(N / 100)`` scores (at least one)."""
        if not self.per_ligand:
            return 0.0
        k = max(1, math.ceil(0.01 * len(self.per_ligand)))
        best = sorted((r.score for r in self.per_ligand), reverse=True)[:k]
        return math.fsum(best) / k

    def scores(self) -> dict[str, float]:
        return {r.ligand_id: r.score for r in self.per_ligand}


_STOP = object()


def _worker(pocket, config, index, tasks, results):
    while True:
        item = tasks.get()
        if item is _STOP:
            return
        seq, lig = item
        if isinstance(lig, LigandRecordError):
            results.put((seq, Skipped(lig.ligand_id, str(lig))))
            continue
        try:
            start = time.perf_counter()
            res = match_probes_shape(lig, pocket, config=config, index=index)
            elapsed = time.perf_counter() - start
        except (MoleculeError, ValueError) as exc:
            results.put((seq, Skipped(getattr(lig, "id", None), str(exc))))
            continue
        results.put((seq, LigandResult(lig.id, res.score, res.evaluations, elapsed, lig.n_atoms)))


def screen(pocket: Pocket, ligands: Iterable[Ligand | LigandRecordError],
           config: KnobConfig = BASELINE, workers: int = 1,
           index: PocketGrid | None = None) -> ScreeningReport:
    """Dock every ligand of a stream and aggregate the results.

    Parameters
    ----------
    pocket : Pocket
    ligands : iterable
        Ligands, possibly interleaved with :class:`LigandRecordError` items
        (as produced by ``parse_ligands(..., errors="yield")``). Bad records
        and ligands the kernel rejects are listed in ``report.skipped``.
    config : KnobConfig
    workers : int
        Number of worker threads.
    index : PocketGrid, optional
        Nearest-point index for ``pocket``; changes speed, never scores.
    """
    if workers < 1:
        raise ScreeningError(f"workers must be >= 1, got {workers}")
    tasks: queue.Queue = queue.Queue(maxsize=4 * workers)
    results: queue.Queue = queue.Queue()
    pool = [threading.Thread(target=_worker, args=(pocket, config, index, tasks, results), daemon=True)
            for _ in range(workers)]
    start = time.perf_counter()
    for t in pool:
        t.start()
    count = 0
    try:
        for count, lig in enumerate(ligands, start=1):
            tasks.put((count, lig))
    finally:
        for _ in pool:
            tasks.put(_STOP)
        for t in pool:
            t.join()
    wall = time.perf_counter() - start
    done, skipped = [], []
    while not results.empty():
        seq, item = results.get()
        (skipped if isinstance(item, Skipped) else done).append((seq, item))
    done.sort(key=lambda x: (x[1].ligand_id, x[0]))
    skipped.sort(key=lambda x: x[0])
    return ScreeningReport(pocket.id, config, [r for _, r in done], wall, [s for _, s in skipped])


def overlap_degradation(approx: ScreeningReport, baseline: ScreeningReport) -> float:
    """Percent loss of the top-1% mean score relative to ``baseline``.

    Negative values mean the approximate run found better poses.
    """
    if approx.pocket_id != baseline.pocket_id:
        raise ScreeningError("reports come from different pockets")
    if {r.ligand_id for r in approx.per_ligand} != {r.ligand_id for r in baseline.per_ligand}:
        raise ScreeningError("reports cover different ligand sets")
    ref = baseline.top1pct_mean
    if ref == 0:
        raise ScreeningError("degenerate baseline")
    return (1.0 - approx.top1pct_mean / ref) * 100.0


# -- report files ------------------------------------------------------------

CSV_HEADER = "ligand_id,score,evaluations,time,atoms"
_KNOBS = (("hp_step", "high_precision_step", int), ("lp_step", "low_precision_step", int),
          ("threshold", "threshold", float), ("repetitions", "repetitions", int),
          ("refinement", "enable_refinement", lambda v: v == "true"))


def render_report_csv(report: ScreeningReport) -> str:
    lines = [CSV_HEADER]
    lines += [f"{r.ligand_id},{r.score!r},{r.evaluations},{r.time!r},{r.atoms}" for r in report.per_ligand]
    return "\n".join(lines) + "\n"


def render_summary(report: ScreeningReport) -> str:
    cfg = report.config
    pairs = [("pocket_id", report.pocket_id)]
    for key, attr, _ in _KNOBS:
        value = getattr(cfg, attr)
        pairs.append((key, str(value).lower() if isinstance(value, bool) else repr(value)))
    pairs += [("ligands", len(report.per_ligand)), ("total_atoms", report.total_atoms),
              ("wall_time", repr(report.wall_time)), ("throughput", repr(report.throughput)),
              ("top1pct_mean", repr(report.top1pct_mean)), ("skipped", len(report.skipped))]
    pairs += [("skip", f"{s.ligand_id or ''}|{s.reason}") for s in report.skipped]
    return "".join(f"{k}={v}\n" for k, v in pairs)


def parse_report(csv_text: str, summary_text: str) -> ScreeningReport:
    """Inverse of :func:`render_report_csv` plus :func:`render_summary`."""
    summary: dict[str, str] = {}
    skipped = []
    for n, line in enumerate(summary_text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ScreeningError(f"summary line {n} is not key=value")
        if key == "skip":
            lig, _, reason = value.partition("|")
            skipped.append(Skipped(lig or None, reason))
        else:
            summary[key] = value
    try:
        config = KnobConfig(**{attr: conv(summary[key]) for key, attr, conv in _KNOBS})
        rows = csv_text.splitlines()
        if not rows or rows[0] != CSV_HEADER:
            raise ScreeningError("missing report header")
        per = []
        for row in rows[1:]:
            if not row:
                continue
            lid, score, evals, t, atoms = row.split(",")
            per.append(LigandResult(lid, float(score), int(evals), float(t), int(atoms)))
        return ScreeningReport(summary["pocket_id"], config, per, float(summary["wall_time"]), skipped)
    except KeyError as exc:
        raise ScreeningError(f"summary lacks {exc.args[0]}") from None
