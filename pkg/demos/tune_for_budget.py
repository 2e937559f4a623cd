"""Profile a handful of configurations and let the planner pick one per budget.

Training crosses three pockets with four ligand batches, giving twelve
timed screens per configuration, enough to fit the eight-parameter time
model. The planner then answers: given this many seconds for a database
of 100 000 ligands, which configuration loses the least accuracy?
"""

import numpy as np

from geodock.autotuner import build_knowledge_base, plan_for, scenario_sweep
from geodock.io import DatasetSpec, generate_synthetic, synthetic_pocket
from geodock.kernel import BASELINE, KnobConfig
from geodock.perfmodel import DataFeatures

pockets = [synthetic_pocket(n, seed=n, pocket_id=f"P{n}") for n in (30, 60, 90)]
batches = [generate_synthetic(DatasetSpec(30, a, r, seed=k, id_prefix=f"B{k}_", pocket_points=4))[0]
           for k, (a, r) in enumerate([((9, 12), (2, 2)), ((12, 16), (2, 2)),
                                       ((14, 18), (3, 3)), ((18, 24), (4, 4))])]
design = [BASELINE, KnobConfig(1, 1, 0.0, 3, True), KnobConfig(2, 45, 0.5, 2, True),
          KnobConfig(5, 90, 0.8, 1, True), KnobConfig(3, 30, 0.0, 2, False)]
# Short screens are repeated for at least 0.2 s and the median run is kept,
# which steadies the timings of the fastest configurations.
kb = build_knowledge_base(design, [(p, b) for p in pockets for b in batches], min_seconds=0.2)


def label(cfg):
    return (f"hp={cfg.high_precision_step} lp={cfg.low_precision_step} thr={cfg.threshold} "
            f"reps={cfg.repetitions} {'refine' if cfg.enable_refinement else 'flat'}")


print(f"{'config':40}  degradation  adj. R2")
for prof in kb:
    print(f"{label(prof.config):40}  {prof.mean_degradation:10.2f}%  {prof.perf.adjusted_r2:7.3f}")

feats = DataFeatures(pocket_points=60, avg_atoms=15, avg_rotamers=3, ligand_count=100_000)
full = plan_for(kb, BASELINE, feats, np.inf).predicted_time
print(f"\nexhaustive screen of 100 000 ligands: {full:.0f} s predicted")
for row in scenario_sweep(kb, feats, budgets=full * np.array([2.0, 0.5, 0.1, 0.02, 0.001])):
    p = row.plan
    print(f"budget {row.swept_value:8.1f} s -> {label(p.chosen):40}  completion {p.expected_completion:5.1f}%  "
          f"expected degradation {p.expected_degradation:.2f}%")
