"""Fit BBS and the competitor models to the bundled data sets.

Run:  python demos/02_real_data_fits.py
"""

import warnings

import numpy as np

from bimodal_bs.cli import cmd_fit, format_fit_report
from bimodal_bs.datasets import bundled_path, km_estimate, load_bundled
from bimodal_bs.bbs import bbs_sf

warnings.simplefilter("ignore")  # the BBSO fit on kevlar drifts to a boundary

for name in ("old_faithful", "kevlar", "entomology"):
    if bundled_path(name) is None:
        print(f"{name}: data file not available, skipped\n")
        continue
    ds = load_bundled(name)
    rep = cmd_fit(ds)
    print(format_fit_report(rep))

    # profile log-likelihood over the delta grid
    trace = rep.bbs_fit.profile_trace
    top = sorted(trace, key=lambda r: -r[1])[:3]
    print("best three delta values:", ", ".join(f"{d:+.0f} ({ll:.3f})" for d, ll in top))

    # how close the fitted survival is to Kaplan-Meier
    km = km_estimate(ds)
    gap = np.max(np.abs(km.survival - bbs_sf(km.times, rep.bbs_fit.params)))
    print(f"max |KM - BBS survival| = {gap:.4f}\n")
