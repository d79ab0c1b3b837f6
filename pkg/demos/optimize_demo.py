"""Walkthrough: a small multi-objective placement optimization.

Optimizes reflector placements in an L-shaped room for both objectives at
once: f1 counts grid positions with non-unique distance fingerprints (bad
for global localization), f2 sums the multilateration GDOP over the grid
(bad for local accuracy). The swarm mixes placements of different sizes via
add/remove mutations, so the Pareto front also exposes the trade-off
against the number of reflectors.

Takes a couple of minutes.  Run:  python3 demos/optimize_demo.py
"""

import pathlib
import time

import numpy as np

from reflectopt.files import write_front, write_placement
from reflectopt.geom import Polygon, RoomModel
from reflectopt.mopso import PsoConfig, run

OUT = pathlib.Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

room = RoomModel(
    boundary=Polygon([(0, 0), (10, 0), (10, 8), (5, 8), (5, 4), (0, 4)]),
    grid_size=0.25,
    z_r=0.5,
    z_l=5.0,
    r_res=0.075,
    cone_half_angle=np.deg2rad(45.0),
    wall_margin=0.5,
)

config = PsoConfig(
    swarm_size=20,
    iterations=20,
    m_max=16,
    m_init_range=(10, 13),
    n_types=2,
    seed=7,
    snapshot_every=0,
)

print(f"swarm of {config.swarm_size}, {config.iterations} iterations, "
      f"{config.m_init_range[0]}-{config.m_init_range[1]} reflectors initially")
t0 = time.time()
archive, log = run(room, config)
print(f"finished in {time.time() - t0:.0f} s, {log[-1].evaluations} evaluations\n")

print("iteration  best_f1  best_f2")
for rec in log[:: max(1, len(log) // 10)]:
    print(f"{rec.iteration:9d}  {rec.best_f1:7.0f}  {rec.best_f2:8.2f}")

print("\nPareto front (ambiguous cells vs summed GDOP vs reflector count):")
for e in sorted(archive.entries, key=lambda e: e.f1):
    print(f"  m={e.placement.m:2d}  f1={e.f1:6.0f}  f2={e.f2:10.4f}")

write_front(OUT / "demo_front.csv", archive)
best_f1 = min(archive.entries, key=lambda e: (e.f1, e.f2))
write_placement(OUT / "demo_best_ambiguity.txt", best_f1.placement, config.n_types)
print(f"\nwrote {OUT / 'demo_front.csv'} and {OUT / 'demo_best_ambiguity.txt'}")
