# Occupation time near the breakpoint and moment stability.
# Run: python3 demos/diagnostics.py

import numpy as np

from jumpmilstein import MILSTEIN, TRANSFORMED, fit_occupation, moment_diagnostic, occupation_time
from jumpmilstein.fixtures import lipschitz_sine, sign_drift
from jumpmilstein.schemes import dynamics_for

# %% expected time the transformed scheme spends within eps of zero
dyn = dynamics_for(sign_drift(), TRANSFORMED)
eps = [0.4, 0.2, 0.1, 0.05]
Ms = [16, 64, 256]
est = occupation_time(dyn, 0.0, eps, Ms, 300, 3, M_ref=2048)
print("rows M, columns eps", eps)
for M, row in zip(Ms, est):
    print(f"  M={M:4d}", np.round(row, 4))
fit = fit_occupation(eps, [1.0 / m for m in Ms], est)
print(f"fit: {fit.coef_eps:.3f} eps + {fit.coef_sqrt_delta:.3f} sqrt(delta)")

# %% E[sup |Z|^2] should not grow with M
rep = moment_diagnostic(lipschitz_sine(), MILSTEIN, 2, [16, 128, 1024], 300, 4)
for M, e, s in zip(rep.M, rep.estimate, rep.stderr):
    print(f"  M={M:5d}  E sup|Z|^2 = {e:.4f} +- {s:.4f}")
print("max/min ratio", round(rep.ratio, 4), "growth flagged" if rep.growth_flag else "no growth")
