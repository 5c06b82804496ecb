"""The stimulus pulse and why its smoothness matters.

A hard rectangular stimulus would cap every scheme at first order through
the two jumps it adds to the right-hand side.  The pulse used here,
A (1 - s^2)^5 on |s| < 1, meets zero with four continuous derivatives at
both ends of its 2 ms support, so the forcing never limits schemes up to
order 4.  The prefactor is chosen so the delivered charge is exactly the
nominal one.

Writes stimulus_shape.png next to this script if matplotlib is available.
"""

import pathlib

import numpy as np

from ionstep.beeler_reuter import StimulusProfile

stim = StimulusProfile()
lo, hi = stim.t_start - stim.width, stim.t_start + stim.width
print(f"support     ({lo}, {hi}) ms")
print(f"amplitude   {stim.amplitude} uA/cm^2")
print(f"norm const  {stim.normalization} (= 693/512 for exponent 5)")

x, w = np.polynomial.legendre.leggauss(12)
t_quad = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
charge = 0.5 * (hi - lo) * float(np.dot(w, stim.waveform(t_quad)))
print(f"charge      {charge!r} (nominal {stim.charge})")

# finite-difference stencil responses (undivided, so same units per row)
# at the support edges, against the same stencil's interior maximum
delta = 1e-3
stencils = {
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}
print(f"\n{'order':>5} {'at t=19':>12} {'at t=21':>12} {'interior max':>14}")
interior = np.linspace(lo + 0.05, hi - 0.05, 201)
for order, st in stencils.items():
    fd = lambda t0: sum(c * stim.current(t0 + k * delta) for k, c in st.items())
    scale = max(abs(fd(t)) for t in interior)
    print(f"{order:>5} {fd(lo):>12.3e} {fd(hi):>12.3e} {scale:>14.3e}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available, skipping the figure")
else:
    t = np.linspace(18.5, 22.5, 801)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, stim.waveform(t), "k")
    ax.fill_between(t, stim.waveform(t), alpha=0.2)
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("stimulus current (uA/cm^2)")
    out = pathlib.Path(__file__).with_name("stimulus_shape.png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    print(f"figure written to {out}")
