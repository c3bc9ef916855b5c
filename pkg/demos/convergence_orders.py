# Empirical strong orders of the three schemes on shared randomness.
# Small path counts keep this under a minute; the acceptance suite uses more.
# Run: python3 demos/convergence_orders.py

import numpy as np

from jumpmilstein import EULER, MILSTEIN, TRANSFORMED, ExperimentSpec, GBMJumpOracle, compare_schemes, strong_error
from jumpmilstein.fixtures import gbm_jump, sign_drift


def show(label, rep):
    print(label)
    for M, e, s in zip(rep.M, rep.error, rep.stderr):
        print(f"  M={M:5d}  error={e:.5f} +- {s:.5f}")
    print(f"  fitted order {rep.slope:.3f}  (95% CI {rep.fit.ci_low:.3f} .. {rep.fit.ci_high:.3f})")


# %% smooth coefficients: exact solution available, Milstein vs Euler
model = gbm_jump()
oracle = GBMJumpOracle(0.05, 0.2, -0.1, 1.0)
kw = dict(model=model, M_list=(16, 32, 64, 128, 256), M_ref=2048, n_paths=500, seed=1, oracle=oracle)
cmp = compare_schemes(ExperimentSpec(kind=MILSTEIN, **kw), ExperimentSpec(kind=EULER, **kw))
show("quasi-Milstein, geometric jump-diffusion", cmp.first)
show("Euler, geometric jump-diffusion", cmp.second)
print("Milstein / Euler error ratio per M:", np.round(cmp.ratio, 3))

# %% discontinuous drift: transformed scheme against its own fine run
rep = strong_error(ExperimentSpec(sign_drift(), TRANSFORMED, (16, 32, 64, 128), 4096, n_paths=200, seed=2))
show("transformed quasi-Milstein, sign-switching drift", rep)

# %% the CSV written by the command-line tool has the same columns
print(rep.to_csv())
