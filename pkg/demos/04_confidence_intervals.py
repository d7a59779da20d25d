"""Delta-method intervals for S(t), E[T] and Var[T], and a quick coverage check.

Run:  python demos/04_confidence_intervals.py
"""

from bimodal_bs.bbs import BbsParams, bbs_moments, bbs_quantile, bbs_sample
from bimodal_bs.datasets import load_bundled
from bimodal_bs.estimation import fit_fixed_delta, fit_profile
from bimodal_bs.inference import ci_mean, ci_survival, ci_variance
from bimodal_bs.numerics import RngStream

ds = load_bundled("kevlar")
fit = fit_profile(ds.observations)
print("kevlar fit:", fit.params)
for t in (2000.0, 8831.0, 20000.0):
    c = ci_survival(t, fit, ds.observations, rho=0.05)
    print(f"S({t:g}) = {c.estimate:.4f}  [{c.lower:.4f}, {c.upper:.4f}]")
m = ci_mean(fit, ds.observations)
v = ci_variance(fit, ds.observations, rho=0.025)
print(f"E[T] = {m.estimate:.1f}  [{m.lower:.1f}, {m.upper:.1f}]  ({m.confidence:.0%})")
print(f"Var[T] = {v.estimate:.4g}  [{v.lower:.4g}, {v.upper:.4g}]  (at least {v.confidence:.0%})")

# coverage of the survival interval at the true median
truth = BbsParams(0.5, 1.0, -1.0)
med = float(bbs_quantile(0.5, truth))
hits, reps = 0, 200
for r in range(reps):
    f = fit_fixed_delta(bbs_sample(200, truth, RngStream(5, (r,))), -1.0)
    c = ci_survival(med, f)
    hits += c.lower <= 0.5 <= c.upper
print(f"\nsurvival CI coverage at the median: {hits / reps:.3f} over {reps} samples (nominal 0.95)")
print("true mean / variance:", round(bbs_moments(truth).mean, 4), round(bbs_moments(truth).variance, 4))
