"""Small Monte Carlo studies: estimator bias/MSE, then BBS vs BBSO.

Run:  python demos/03_simulation_study.py [replications]

The same cells can be driven from the command line with the scenario files
in demos/scenarios, e.g.
    python -m bimodal_bs simulate demos/scenarios/study1.txt --seed 1 --out out/
"""

import sys
import time

from bimodal_bs.simulation import Scenario, run_study1, run_study2

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 200

# study 1: known delta, fit (alpha, beta); vary n and censoring
print(f"{'n':>4} {'cens':>5} {'bias a':>9} {'mse a':>9} {'bias b':>9} {'mse b':>9}")
for n in (10, 50):
    for c in (0.0, 0.3):
        sc = Scenario("bbs", (("alpha", 0.5), ("beta", 1.0), ("delta", 1.0)), n,
                      censor_proportion=c, replications=reps, seed=11)
        r = run_study1(sc)
        print(f"{n:>4} {c:>5.1f} {r.bias['alpha']:+9.4f} {r.mse['alpha']:9.4f} "
              f"{r.bias['beta']:+9.4f} {r.mse['beta']:9.4f}")

# study 2: misspecified generators, profiled BBS against BBSO
t0 = time.perf_counter()
cells = [Scenario("bs", (("alpha", 0.5), ("beta", 1.0)), 50, replications=reps // 4, seed=3, study=2),
         Scenario("mxbs", (("alpha1", 0.1), ("beta1", 0.5), ("alpha2", 1.0), ("beta2", 2.0), ("p", 0.75)),
                  50, replications=reps // 4, seed=4, study=2)]
for sc in cells:
    r = run_study2(sc)
    print(f"\n{sc.generator}: mean loglik BBS {r.mean_loglik['bbs']:.4f}, BBSO {r.mean_loglik['bbso']:.4f}")
    print("  mean BBS estimates", {k: round(v, 4) for k, v in r.mean_estimates["bbs"].items()})
print(f"({time.perf_counter() - t0:.1f}s)")
