"""The phi functions that drive the exponential schemes.

phi_0 = exp, and each next one integrates the previous against a monomial:
phi_{j+1}(z) = (phi_j(z) - 1/j!)/z.  They interpolate between exp-like
growth for z > 0 and the algebraic decay -1/z, 1/z^2 ... as z -> -inf,
which is exactly why the schemes stay stable with stiff negative diagonal
entries: the weights shrink instead of blowing up.

Prints a small value table, checks the recurrence numerically, and writes
phi_functions.png next to this script if matplotlib is available.
"""

import math
import pathlib

import numpy as np

from ionstep import phi_eval
from ionstep.phi import ORDER_MAX, phi_table

print("z        " + "".join(f"phi_{j}(z)".rjust(13) for j in range(4)))
for z in (-1e4, -100.0, -1.0, -1e-8, 0.0, 1.0, 10.0):
    row = [phi_eval(j, z) for j in range(4)]
    print(f"{z:<9g}" + "".join(f"{v:13.5e}" for v in row))

# the downward/upward recurrence is consistent across both branches
worst = 0.0
for z in np.concatenate([-np.geomspace(1e-6, 1e5, 40), np.geomspace(1e-6, 30, 20)]):
    tab = phi_table(float(z), ORDER_MAX)
    for j in range(ORDER_MAX):
        lhs = tab[j + 1] * z
        rhs = tab[j] - 1.0 / math.factorial(j)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
# the residual is limited by cancellation in the plain-float rhs near 0,
# which is exactly why the library evaluates small arguments by series
print(f"\nrecurrence residual over both branches: {worst:.2e}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available, skipping the figure")
else:
    z = np.linspace(-50.0, 5.0, 1101)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j in range(4):
        ax.semilogy(z, [abs(phi_eval(j, float(v))) for v in z], label=f"phi_{j}")
    ax.set_xlabel("z")
    ax.set_ylabel("|phi_j(z)|")
    ax.legend(frameon=False)
    out = pathlib.Path(__file__).with_name("phi_functions.png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    print(f"figure written to {out}")
