"""A small error-versus-step study on the membrane model.

Three schemes, three step sizes, and a 2^5-times-finer reference: enough
to see the error curves separate without the multi-minute full grid (that
one lives in the benchmark CLI: ``ionstep-bench converge``).  Runs in
about half a minute.  These are the coarsest benchmark steps, at the edge
of the asymptotic range, so the fitted slopes here read a few tenths low;
the full six-step ladder recovers the nominal orders.

Writes convergence_ladder.png next to this script if matplotlib is
available.
"""

import pathlib

from ionstep.bench import RunConfig, convergence_study

cfg = RunConfig(refine=5, repeats=1)
schemes = ("eab_2", "rl_3", "bdf_3")
steps = (0.2, 0.1, 0.05)
result = convergence_study(cfg, schemes, steps)

print(f"reference mesh: {result.m_ref} steps "
      f"({'cached' if result.reference_cached else 'computed'})")
print(f"\n{'scheme':8} {'h':>8} {'e_inf':>12} {'e_ta':>12} {'cpu_s':>8}")
for r in result.rows:
    print(f"{r.key:8} {r.h:>8} {r.e_inf:>12.4e} {r.e_ta:>12.4e} {r.cpu_s:>8.2f}")

print("\nfitted slopes over this coarse range (nominal order in parentheses):")
for key, slope in result.slopes.items():
    print(f"  {key}: {slope:.2f} ({key.rsplit('_', 1)[1]})")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available, skipping the figure")
else:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for key in schemes:
        rows = [r for r in result.rows if r.key == key]
        ax.loglog([r.h for r in rows], [r.e_inf for r in rows], "o-", label=key)
    ax.set_xlabel("h (ms)")
    ax.set_ylabel("relative max-norm error")
    ax.legend(frameon=False)
    ax.grid(True, which="both", alpha=0.3)
    out = pathlib.Path(__file__).with_name("convergence_ladder.png")
    fig.savefig(out, dpi=120, bbox_inches="tight")
    print(f"figure written to {out}")
