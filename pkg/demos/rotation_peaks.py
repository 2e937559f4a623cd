"""Look at how peaked the overlap landscape is around each rotatable bond.

For every fragment met during one exhaustive sweep, the script records the
spread of the rotation profile and the width of its best peak, bins the
fragments by relative size, and then asks how often a tiled search with a
given tile would land inside the best peak.
"""

from geodock.analysis import PeakStats, analyze_dataset, binned_rows, tile_hit_probability
from geodock.geometry import PocketGrid
from geodock.io import DatasetSpec, generate_synthetic

ligands, pocket = generate_synthetic(DatasetSpec(40, (12, 28), (2, 4), seed=3, pocket_points=80))
records = analyze_dataset(ligands, pocket, index=PocketGrid(pocket.points))
print(f"{len(records)} fragments from {len(ligands)} ligands\n")

print("relative size   fragments  mean norm. delta  mean peaks  mean best width")
for row in binned_rows(records, bins=5):
    lo, hi, n, delta, peaks, width = row[:6]
    if n:
        print(f"  [{lo:.1f}, {hi:.1f}]   {n:9d}  {delta:16.3f}  {peaks:10.2f}  {width:15.1f}")


stats = [PeakStats(r.delta_overlap, best_peak_width=r.best_peak_width) for r in records]
print("\ntile  hit probability  rotations scored per fragment")
for tile, prob, evals in tile_hit_probability(stats, [6, 10, 18, 30, 45, 90]):
    print(f"{tile:4d}  {prob:15.2f}  {evals:29.1f}")
