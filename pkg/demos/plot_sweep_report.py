"""
A small sweep of pruning levels and quantizers
==============================================

"""

import numpy as np
from hamsham.bench import RunConfig, sweep, render_report

W = np.random.default_rng(3).normal(size=(256, 256))

grid = [RunConfig(matrix=W, method=m, p=p, k=32, b=32, store="sham", trials=3,
                  name=f"{m} p={p}")
        for m in ("pr-ws", "pr-pq") for p in (80, 90, 95, 99)]
table = sweep(grid, max_distortion=0.5)

for row in table.rows:
    print(f"{row.name:14s} psi={row.psi_measured:.4f}  distortion={row.distortion:.4f}")
# best is the index of the smallest psi whose distortion stays under the cap
best = table.rows[table.best] if table.best is not None else None
print("best:", best.name if best else None)

if best:
    print(render_report(best, "markdown"))
