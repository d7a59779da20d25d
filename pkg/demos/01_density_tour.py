"""A tour of the bimodal BS density: shape, modes, hazard and moments.

Run:  python demos/01_density_tour.py
"""

import numpy as np

from bimodal_bs.bbs import (
    BbsParams, bbs_cdf, bbs_entropy, bbs_modes, bbs_moments, bbs_pdf, bbs_quantile,
    bbs_sample, hazard_diagnostic,
)
from bimodal_bs.numerics import RngStream

# delta = 0 is the classical BS law; moving delta away from 0 splits the mass
for d in (0.0, -0.5, -1.0, -2.0, 3.0):
    p = BbsParams(1.0, 1.0, d)
    m = bbs_modes(p)
    print(f"delta={d:+.1f}  maxima={np.round(m.maxima, 4)}  minima={np.round(m.minima, 4)}")

# the standard bimodal case
p = BbsParams(1.0, 1.0, -1.0)
t = np.geomspace(0.02, 6, 12)
print("\n t        pdf       cdf")
for ti, fi, Fi in zip(t, bbs_pdf(t, p), bbs_cdf(t, p)):
    print(f"{ti:7.3f} {fi:9.5f} {Fi:9.5f}")

# quantiles invert the cdf
u = np.array([0.05, 0.25, 0.5, 0.75, 0.95])
q = bbs_quantile(u, p)
print("\nquantiles", np.round(q, 4), "round trip", np.abs(bbs_cdf(q, p) - u).max())

# moments from the closed-form expansion vs a large sample
m = bbs_moments(p)
x = bbs_sample(200_000, p, RngStream(1))
print(f"\nmean {m.mean:.5f} (sample {x.mean():.5f}), variance {m.variance:.5f} (sample {x.var():.5f})")
print(f"entropy {bbs_entropy(p):.5f}")

# hazard shape on a grid where the survival is not negligible
grid = np.geomspace(0.02, float(bbs_quantile(0.999, p)), 400)
hd = hazard_diagnostic(p, grid)
print("hazard shape:", hd.shape())
print("hazard shape at delta=0, alpha=0.5:",
      hazard_diagnostic(BbsParams(0.5, 1.0, 0.0), np.linspace(0.05, 0.99, 100)).shape())
