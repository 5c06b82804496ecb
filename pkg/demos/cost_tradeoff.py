"""Why avoid Newton iterations: stabilized exponential vs implicit cost.

Both schemes below run the same 396 ms action potential at h = 0.025 ms
and land in the same accuracy ballpark (see the convergence demo), but the
implicit order-3 backward-difference scheme pays for a finite-difference
Jacobian and a linear solve inside every Newton iteration of every step,
while the stabilized exponential scheme costs two right-hand-side
evaluations and a phi table per step, with no solver at all.

The accuracy-matched comparison over the full ladder is
``ionstep-bench cost``.
"""

from ionstep.bench import RunConfig, build_system, timed_integrate
from ionstep.schemes import SchemeSpec

cfg = RunConfig(repeats=3)
sys_ = build_system(cfg)
m = 15840  # h = 0.025 ms

print(f"{'scheme':8} {'cpu_s':>8} {'newton iters':>13} {'per step':>10}")
results = {}
for key in ("rl_3", "eab_3", "bdf_3", "cn_2"):
    traj, report, cpu = timed_integrate(sys_, SchemeSpec.parse(key), m, cfg.repeats)
    assert report.stable
    results[key] = cpu
    print(f"{key:8} {cpu:>8.3f} {report.newton_iterations:>13} "
          f"{cpu / m:>10.2e}")

print(f"\nbdf_3 / rl_3 wall-time ratio: {results['bdf_3'] / results['rl_3']:.1f}x")
