"""Which scheme survives which step size on the membrane model.

The gate rates reach about 80/ms already at rest, so the explicit
classical schemes fall over early: Adams-Bashforth needs h below roughly
0.006 ms and classical Runge-Kutta below 0.03 ms, while the stabilized
exponential schemes and the implicit schemes run at every step size here.
That gap is the whole point of stabilizing the gate block.

Coarser half of the benchmark ladder only, to keep this quick; the CLI
command ``ionstep-bench stability`` sweeps the full one.
"""

from ionstep.bench import RunConfig, stability_study
from ionstep.schemes import ALL_SCHEME_KEYS

steps = (0.2, 0.1, 0.05, 0.025)
rows = stability_study(RunConfig(repeats=1), ALL_SCHEME_KEYS, steps)

hs = sorted({r.h for r in rows}, reverse=True)
table = {}
for r in rows:
    table.setdefault(r.key, {})[r.h] = r

print(f"{'scheme':8}" + "".join(f"{h:>10}" for h in hs))
for key in ALL_SCHEME_KEYS:
    cells = ["ok" if table[key][h].stable else "--" for h in hs]
    print(f"{key:8}" + "".join(f"{c:>10}" for c in cells))

blown = [(r.key, r.h) for r in rows if not r.stable]
print(f"\n{len(blown)} of {len(rows)} runs diverged:",
      ", ".join(f"{k}@{h}" for k, h in blown))
