# A quick look at the map that removes a drift discontinuity.
# Run: python3 demos/transform_tour.py

import numpy as np

from jumpmilstein import build_transform, transform_model
from jumpmilstein.fixtures import sign_drift

# %% the model: drift +1 left of zero, -1 right of it, unit noise
model = sign_drift()
G = build_transform(model)
print("breakpoints", G.zetas, "alphas", G.alphas, "bump radius", G.nu)

# %% G bends the line only inside [zeta - nu, zeta + nu]
xs = np.linspace(-0.1, 0.1, 9)
for x, g, gp in zip(xs, G.g(xs), G.g_prime(xs)):
    print(f"x={x:+.4f}  G(x)={g:+.6f}  G'(x)={gp:.4f}")

# %% second derivative jumps from -2 alpha to +2 alpha at the breakpoint
print("G'' one-sided limits at 0:", G.g_second_limits(0))

# %% inverse is exact to the tolerance
x = np.random.default_rng(0).uniform(-0.2, 0.2, 10_000)
print("max round-trip error", np.abs(G.g_inverse(G.g(x)) - x).max())

# %% the transformed drift no longer jumps
tm = transform_model(model, G)
h = 1e-9
print("original drift around 0:", model.mu(-h), model.mu(h))
print("transformed drift around 0:", tm.mu_t(-h), tm.mu_t(h))

# a coarse text plot of the transformed drift across the bump
zs = np.linspace(-0.08, 0.08, 17)
for z, m in zip(zs, tm.mu_t(zs)):
    bar = "#" * int(20 * (m + 1.5) / 3)
    print(f"{z:+.3f} {m:+.3f} {bar}")
