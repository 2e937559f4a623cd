"""Knowledge base, budget-constrained configuration choice and scenario sweeps.

A knowledge base holds one :class:`ConfigProfile` per knob configuration:
its mean overlap degradation against the baseline and its fitted
time-to-solution model. Given a workload and a time budget the planner
picks the most accurate configuration that finishes in time. When nothing
fits, it picks the fastest configuration and reports the fraction of the
database that would be done when the budget runs out.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import PocketGrid
from .kernel import BASELINE, ConfigError, KnobConfig, prepare
from .molecule import Ligand, Pocket
from .perfmodel import (FEATURE_NAMES, DataFeatures, FitError, Observation, PerfModel, fit,
                        predict)
from .screening import ScreeningReport, overlap_degradation, screen


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigProfile:
    config: KnobConfig
    mean_degradation: float
    perf: PerfModel


@dataclass(frozen=True)
class Plan:
    chosen: KnobConfig
    predicted_time: float
    expected_completion: float
    expected_degradation: float

    @property
    def feasible(self) -> bool:
        return self.expected_completion >= 100.0


# -- design spaces -----------------------------------------------------------

#: Knob names accepted in design-space files, mapped to KnobConfig fields.
KNOB_KEYS = {
    "hp_step": "high_precision_step", "high_precision_step": "high_precision_step",
    "lp_step": "low_precision_step", "low_precision_step": "low_precision_step",
    "threshold": "threshold",
    "repetitions": "repetitions", "reps": "repetitions",
    "refinement": "enable_refinement", "enable_refinement": "enable_refinement", "refine": "enable_refinement",
}


def design_space(high_precision_step=(1,), low_precision_step=None, threshold=(0.0,),
                 repetitions=(3,), enable_refinement=(False,)) -> list[KnobConfig]:
    """Full-factorial expansion of knob value lists.

    With ``low_precision_step=None`` every configuration reuses its high
    precision step, which is what a space without a coarse pass needs.
    Combinations with ``lp < hp`` are dropped.
    """
    out = []
    lps = (None,) if low_precision_step is None else tuple(low_precision_step)
    for hp, lp, th, reps, ref in itertools.product(high_precision_step, lps, threshold,
                                                    repetitions, enable_refinement):
        lp = hp if lp is None else lp
        if lp < hp:
            continue
        out.append(KnobConfig(hp, lp, th, reps, ref))
    return out


def flat_space() -> list[KnobConfig]:
    """Uniform angular sampling only: 8 steps times 3 repetition counts."""
    return design_space((1, 2, 3, 5, 10, 15, 45, 60), None, (0.0,), (1, 2, 3), (False,))


def full_space() -> list[KnobConfig]:
    """All five knobs: 4 * 2 * 4 * 3 * 2 = 192 configurations."""
    return design_space((1, 2, 3, 5), (45, 90), (0.0, 0.3, 0.6, 0.8), (1, 2, 3), (True, False))


def _parse_value(field, token):
    token = token.strip()
    if field == "enable_refinement":
        low = token.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"bad flag value {token!r}")
    if field == "threshold":
        return float(token)
    return int(token)


def parse_design_space(text: str) -> list[KnobConfig]:
    """Read ``key = v1, v2, ...`` lines and expand them full-factorially.

    Missing knobs keep their baseline value (the low-precision step then
    follows the high-precision one). ``#`` starts a comment.
    """
    values: dict[str, list] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition("=")
        field = KNOB_KEYS.get(key.strip().lower())
        if not sep or field is None:
            raise ConfigError(f"line {n}: expected '<knob> = <values>', got {raw!r}")
        try:
            values[field] = [_parse_value(field, tok) for tok in rest.split(",") if tok.strip()]
        except ValueError as exc:
            raise ConfigError(f"line {n}: {exc}") from None
        if not values[field]:
            raise ConfigError(f"line {n}: no values for {key.strip()}")
    return design_space(
        values.get("high_precision_step", (BASELINE.high_precision_step,)),
        values.get("low_precision_step"),
        values.get("threshold", (BASELINE.threshold,)),
        values.get("repetitions", (BASELINE.repetitions,)),
        values.get("enable_refinement", (BASELINE.enable_refinement,)),
    )


# -- building ----------------------------------------------------------------

@dataclass
class Measurement:
    """Screens of every training set under one configuration."""

    config: KnobConfig
    reports: list[ScreeningReport]


def measure(design: Sequence[KnobConfig], training: Sequence[tuple[Pocket, Sequence[Ligand]]],
            workers: int = 1, use_index: bool = False, progress=None,
            min_seconds: float = 0.0) -> dict[KnobConfig, Measurement]:
    """Screen each training set under each configuration.

    Configurations that run identical computations (same behaviour key)
    are measured once and share the result. Ligands are prepared for the
    kernel before any timing starts.

    Parameters
    ----------
    min_seconds : float
        Short screens are repeated until this much wall time has been
        spent on them, and the run with the median time is kept. Fast
        configurations on small training sets otherwise finish in a few
        milliseconds, where scheduler jitter dominates the measurement.
        The default of 0 screens every set exactly once.
    """
    if min_seconds < 0:
        raise ValueError(f"min_seconds must be >= 0, got {min_seconds}")
    indexes = [PocketGrid(p.points) if use_index else None for p, _ in training]
    for _, ligs in training:
        for lig in ligs:
            if isinstance(lig, Ligand):
                prepare(lig)
    by_key: dict[tuple, Measurement] = {}
    out = {}
    for cfg in design:
        key = cfg.behaviour_key()
        if key not in by_key:
            reports = [_timed(p, ligs, cfg, workers, idx, min_seconds)
                       for (p, ligs), idx in zip(training, indexes)]
            by_key[key] = Measurement(cfg, reports)
            if progress is not None:
                progress(cfg, by_key[key])
        out[cfg] = Measurement(cfg, by_key[key].reports)
    return out


def _timed(pocket, ligands, cfg, workers, index, min_seconds):
    runs = [screen(pocket, ligands, cfg, workers, index)]
    spent = runs[0].wall_time
    while spent < min_seconds:
        runs.append(screen(pocket, ligands, cfg, workers, index))
        spent += runs[-1].wall_time
    runs.sort(key=lambda r: r.wall_time)
    return runs[(len(runs) - 1) // 2]


def observations(measurement: Measurement, training, workers: int = 1) -> list[Observation]:
    """One observation per training set: mean single-worker time per ligand."""
    obs = []
    for rep, (pocket, ligs) in zip(measurement.reports, training):
        feats = DataFeatures.of(pocket, ligs)
        obs.append(Observation(feats, rep.wall_time * workers / len(rep.per_ligand)))
    return obs


def build_knowledge_base(design: Sequence[KnobConfig],
                         training: Sequence[tuple[Pocket, Sequence[Ligand]]],
                         baseline: KnobConfig = BASELINE, workers: int = 1,
                         use_index: bool = False, progress=None,
                         measurements: dict | None = None,
                         min_seconds: float = 0.0) -> list[ConfigProfile]:
    """Profile every configuration on the training sets.

    Parameters
    ----------
    design : sequence of KnobConfig
        Must contain ``baseline``.
    training : sequence of (Pocket, ligands)
        Training sets. At least nine are needed to fit the time model, and
        their features must vary enough for the design matrix to have full
        rank (for example several pockets crossed with several ligand
        batches of different sizes).
    measurements : dict, optional
        Output of :func:`measure` to reuse instead of screening again.
    min_seconds : float
        Passed to :func:`measure`.

    Configurations whose fit fails are dropped with a warning.
    """
    if baseline not in design:
        raise PlanningError("the baseline configuration must be part of the design space")
    if measurements is None:
        measurements = measure(design, training, workers, use_index, progress, min_seconds)
    base = measurements[baseline]
    kb = []
    for cfg in design:
        m = measurements[cfg]
        degr = float(np.mean([overlap_degradation(a, b) for a, b in zip(m.reports, base.reports)]))
        if cfg == baseline:
            degr = 0.0
        try:
            model = fit(cfg, observations(m, training, workers))
        except FitError as exc:
            warnings.warn(f"dropping {cfg}: {exc}", stacklevel=2)
            continue
        kb.append(ConfigProfile(cfg, degr, model))
    return kb


# -- planning ----------------------------------------------------------------

def _find(kb, config):
    for prof in kb:
        if prof.config == config:
            return prof
    raise PlanningError(f"{config} is not in the knowledge base")


def _loss(prof: ConfigProfile) -> float:
    # The baseline is the accuracy reference, so a negative profiled degradation
    # is a sampling effect and counts as no loss at all.
    return max(prof.mean_degradation, 0.0)


def plan_for(kb: Sequence[ConfigProfile], config: KnobConfig, features: DataFeatures,
             budget: float, workers: int = 1) -> Plan:
    """Plan that forces ``config`` (e.g. the baseline) regardless of the budget."""
    prof = _find(kb, config)
    t = predict(prof.perf, features, workers)
    completion = 100.0 if t <= budget else (100.0 * budget / t if t > 0 else 100.0)
    return Plan(config, t, max(0.0, completion), _loss(prof))


def select_config(kb: Sequence[ConfigProfile], features: DataFeatures, budget: float,
                  workers: int = 1, baseline: KnobConfig = BASELINE) -> Plan:
    """Most accurate configuration whose predicted time fits ``budget``.

    Accuracy loss is the profiled degradation clipped at zero. Ties go to
    ``baseline``, then to the faster prediction, then to the smaller
    configuration in knob order. If nothing fits, the fastest configuration
    is returned with ``expected_completion = 100 * budget / time``.
    """
    if not kb:
        raise PlanningError("empty knowledge base")
    rows = [(prof, predict(prof.perf, features, workers)) for prof in kb]
    fits = [(p, t) for p, t in rows if t <= budget]
    if fits:
        prof, t = min(fits, key=lambda pt: (_loss(pt[0]), pt[0].config != baseline, pt[1], pt[0].config))
        return Plan(prof.config, t, 100.0, _loss(prof))
    prof, t = min(rows, key=lambda pt: (pt[1], _loss(pt[0]), pt[0].config))
    return Plan(prof.config, t, max(0.0, 100.0 * budget / t), _loss(prof))


@dataclass(frozen=True)
class SweepRow:
    swept_value: float
    plan: Plan


def scenario_sweep(kb: Sequence[ConfigProfile], features: DataFeatures, workers: int = 1, *,
                   sizes: Iterable[int] | None = None, budgets: Iterable[float] | None = None,
                   budget: float | None = None, baseline: KnobConfig = BASELINE) -> list[SweepRow]:
    """Plans over a range of database sizes (at fixed ``budget``) or of budgets.

    ``features.ligand_count`` is the database size of a budget sweep.
    """
    if (sizes is None) == (budgets is None):
        raise PlanningError("sweep either sizes or budgets")
    if sizes is not None:
        if budget is None:
            raise PlanningError("a size sweep needs a fixed budget")
        return [SweepRow(n, select_config(kb, replace(features, ligand_count=int(n)), budget, workers,
                                                     baseline))
                for n in sizes]
    return [SweepRow(b, select_config(kb, features, b, workers, baseline)) for b in budgets]


SWEEP_COLUMNS = ("swept_value", "completion_pct", "degradation_pct", "hp_step", "lp_step",
                 "threshold", "repetitions", "refinement")


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        c = row.plan.chosen
        w.writerow([repr(row.swept_value), repr(row.plan.expected_completion),
                    repr(row.plan.expected_degradation), c.high_precision_step, c.low_precision_step,
                    repr(c.threshold), c.repetitions, str(c.enable_refinement).lower()])
    return buf.getvalue()


def pareto_front(points: Iterable[tuple[float, float, KnobConfig]]) -> list[tuple[float, float, KnobConfig]]:
    """Non-dominated ``(throughput, degradation, config)`` points.

    Higher throughput and lower degradation are better. The front is
    returned in order of increasing degradation.
    """
    pts = sorted(points, key=lambda p: (p[1], -p[0], p[2]))
    front = []
    best = -math.inf
    for thr, deg, cfg in pts:
        if thr > best:
            front.append((thr, deg, cfg))
            best = thr
    return front


def front_throughput_at(front, level: float) -> float:
    """Best throughput the front offers without exceeding ``level`` degradation."""
    ok = [t for t, d, _ in front if d <= level]
    return max(ok) if ok else -math.inf


# -- knowledge-base file -----------------------------------------------------

KB_COLUMNS = ("hp_step", "lp_step", "threshold", "repetitions", "refinement",
              *(f"coef_{n}" for n in FEATURE_NAMES), "intercept", "adjusted_r2", "n_observations",
              "mean_degradation")
KB_MAGIC = "# geodock knowledge base v1"


def render_knowledge_base(kb: Sequence[ConfigProfile]) -> str:
    """Comma-separated knowledge base; floats use their shortest round-trip form."""
    buf = io.StringIO()
    buf.write(KB_MAGIC + "\n")
    buf.write("# one record per knob configuration; time model in seconds per ligand\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KB_COLUMNS)
    for prof in kb:
        c, m = prof.config, prof.perf
        w.writerow([c.high_precision_step, c.low_precision_step, repr(c.threshold), c.repetitions,
                    str(c.enable_refinement).lower(), *map(repr, m.coefficients), repr(m.intercept),
                    repr(m.adjusted_r2), m.n_observations, repr(prof.mean_degradation)])
    return buf.getvalue()


def parse_knowledge_base(text: str) -> list[ConfigProfile]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or tuple(lines[0].split(",")) != KB_COLUMNS:
        raise PlanningError("knowledge base header missing or unexpected")
    kb = []
    for n, row in enumerate(csv.reader(lines[1:]), start=2):
        if len(row) != len(KB_COLUMNS):
            raise PlanningError(f"knowledge base record {n}: expected {len(KB_COLUMNS)} fields")
        try:
            cfg = KnobConfig(int(row[0]), int(row[1]), float(row[2]), int(row[3]), row[4] == "true")
            coefs = tuple(float(v) for v in row[5:12])
            model = PerfModel(cfg, coefs, float(row[12]), float(row[13]), int(row[14]))
            kb.append(ConfigProfile(cfg, float(row[15]), model))
        except ValueError as exc:
            raise PlanningError(f"knowledge base record {n}: {exc}") from None
    return kb
