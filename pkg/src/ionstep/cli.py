"""Command-line benchmark driver (installed as ``ionstep-bench``).

Subcommands: ``run`` (one scheme at one step size against a refined
reference), ``reference`` (build/load the cached reference), ``converge``
(error ladder with slope fits and optional published-table comparison),
``stability`` (divergence sweep), ``cost`` (accuracy-matched cost table).

Exit codes: 0 success, 2 the requested run diverged, 3 biomarkers were
undefined on an otherwise stable run, 4 configuration/usage error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .bench import (
    ALL_SCHEME_KEYS,
    ConfigError,
    DEFAULT_STEPS,
    RunConfig,
    build_system,
    check_expectations,
    convergence_study,
    cost_study,
    expectation_verdicts,
    load_config,
    load_expectations,
    reference_trajectory,
    stability_study,
    steps_to_mesh_sizes,
    timed_integrate,
    write_report_csv,
    write_trajectory_csv,
)
from .postprocess import BiomarkerUndefined, biomarker_errors, extract_biomarkers, linf_relative_error
from .schemes import SchemeSpec

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_NO_BIOMARKERS = 3
EXIT_CONFIG = 4


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the config-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="benchmark config file (key = value lines)")
    p.add_argument("--model", help="model name (default beeler-reuter)")
    p.add_argument("--T", type=float, dest="t_end", help="duration in ms")
    p.add_argument("--r", type=int, dest="refine",
                   help="reference refinement: reference mesh is 2^r finer")
    p.add_argument("--repeats", type=int, help="timing repeats (median is kept)")
    p.add_argument("--cache-dir", dest="cache_dir",
                   help="directory for cached reference solutions")


def _config_from_args(args) -> RunConfig:
    return load_config(
        args.config,
        model=args.model,
        t_end=args.t_end,
        refine=args.refine,
        repeats=args.repeats,
        cache_dir=args.cache_dir,
    )


def _scheme_from_args(args) -> SchemeSpec:
    text = args.scheme
    if getattr(args, "order", None) is not None:
        if any(ch.isdigit() for ch in text):
            raise ConfigError(
                f"give the order once: either --scheme {text} or --order"
            )
        text = f"{text}_{args.order}"
    try:
        return SchemeSpec.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _mesh_from_args(cfg: RunConfig, args) -> int:
    if (args.h is None) == (args.m is None):
        raise ConfigError("give exactly one of --h or --m")
    if args.h is not None:
        return steps_to_mesh_sizes(cfg.t_end, [args.h])[0]
    if args.m < 3 or args.m % 3 != 0:
        raise ConfigError("--m must be a positive multiple of 3")
    return args.m


def _parse_steps(text: Optional[str]) -> list[float]:
    if text is None:
        return list(DEFAULT_STEPS)
    try:
        steps = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --steps list: {text!r}") from exc
    if not steps:
        raise ConfigError("empty --steps list")
    return steps


def _parse_schemes(text: Optional[str]) -> list[str]:
    if text is None:
        return list(ALL_SCHEME_KEYS)
    keys = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            keys.append(SchemeSpec.parse(tok).key)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not keys:
        raise ConfigError("empty --schemes list")
    return keys


def _fmt(x, spec="{:.6e}") -> str:
    return "--" if x is None else spec.format(x)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    spec = _scheme_from_args(args)
    m = _mesh_from_args(cfg, args)
    m_ref = m << cfg.refine
    ref, cached = reference_trajectory(cfg, m_ref)
    sys_ = build_system(cfg)
    traj, report, cpu = timed_integrate(sys_, spec, m, cfg.repeats)

    h = cfg.t_end / m
    print(f"model      {cfg.model}   T = {cfg.t_end} ms")
    print(f"scheme     {spec.label}   h = {h!r}   m = {m}")
    print(f"reference  m_ref = {m_ref} ({'cached' if cached else 'computed'})")

    if args.out:
        write_trajectory_csv(args.out, traj)
        print(f"trajectory written to {args.out}")

    if not report.stable:
        t_fail = report.failure_index * h
        print(f"DIVERGED at node {report.failure_index} (t = {t_fail:.6g} ms)")
        return EXIT_DIVERGED

    e_inf = linf_relative_error(traj, ref)
    print(f"e_inf      {e_inf:.6e}")
    print(f"cpu_s      {cpu:.6e} (median of {cfg.repeats})")
    if report.newton_iterations:
        print(f"newton     {report.newton_iterations} iterations")

    try:
        bm = extract_biomarkers(traj)
        ref_bm = extract_biomarkers(ref)
        errs = biomarker_errors(bm, ref_bm)
    except BiomarkerUndefined as exc:
        print(f"biomarkers undefined: {exc.reason}")
        return EXIT_NO_BIOMARKERS
    print(
        f"biomarkers t_a = {bm.t_activate:.6f}  t_r = {bm.t_recover:.6f}  "
        f"apd = {bm.duration:.6f} ms"
    )
    print(
        f"errors     e_ta = {errs['e_ta']:.6e}  e_tr = {errs['e_tr']:.6e}  "
        f"e_apd = {errs['e_apd']:.6e}"
    )
    return EXIT_OK


def cmd_reference(args) -> int:
    cfg = _config_from_args(args)
    if args.m_ref is not None:
        m_ref = args.m_ref
    else:
        m = _mesh_from_args(cfg, args)
        m_ref = m << cfg.refine
    if cfg.cache_dir is None:
        print("note: no --cache-dir given, the reference will not be kept",
              file=sys.stderr)
    ref, cached = reference_trajectory(cfg, m_ref)
    print(f"reference  model = {cfg.model}  T = {cfg.t_end}  m_ref = {m_ref}")
    print(f"status     {'loaded from cache' if cached else 'computed'}")
    if args.out:
        write_trajectory_csv(args.out, ref)
        print(f"trajectory written to {args.out}")
    return EXIT_OK


def _print_rows(rows) -> None:
    print(f"{'scheme':8} {'h':>12} {'e_inf':>13} {'e_ta':>13} {'e_apd':>13} "
          f"{'cpu_s':>10} {'stable':>6}")
    for r in rows:
        print(
            f"{r.key:8} {r.h!r:>12} {_fmt(r.e_inf, '{:.4e}'):>13} "
            f"{_fmt(r.e_ta, '{:.4e}'):>13} {_fmt(r.e_apd, '{:.4e}'):>13} "
            f"{r.cpu_s:>10.4f} {'yes' if r.stable else 'no':>6}"
        )


def cmd_converge(args) -> int:
    cfg = _config_from_args(args)
    schemes = _parse_schemes(args.schemes)
    steps = _parse_steps(args.steps)
    result = convergence_study(cfg, schemes, steps)
    _print_rows(result.rows)
    print()
    print(f"{'scheme':8} {'slope':>7}  (reference mesh m_ref = {result.m_ref})")
    for key, slope in result.slopes.items():
        order = int(key.rsplit("_", 1)[1])
        shown = "--" if slope is None else f"{slope:.3f}"
        print(f"{key:8} {shown:>7}  nominal {order}")
    if args.out:
        write_report_csv(args.out, result.rows)
        print(f"\nreport written to {args.out}")
    if args.expectations is not None:
        path = None if args.expectations == "builtin" else args.expectations
        checks = check_expectations(result.rows, load_expectations(path))
        stab_ok, val_ok = expectation_verdicts(checks)
        bad = [c for c in checks
               if not c.stability_ok or (c.binding and c.value_ok is False)]
        for c in bad:
            print(
                f"mismatch {c.scheme_key} h={c.h!r}: expected "
                f"{_fmt(c.expected, '{:.3e}')}, measured "
                f"{_fmt(c.measured, '{:.3e}')}, stable={c.stable}"
            )
        print(f"stability pattern {'matches' if stab_ok else 'MISMATCH'}; "
              f"values {'within tolerance' if val_ok else 'OUT OF TOLERANCE'}")
    return EXIT_OK


def cmd_stability(args) -> int:
    cfg = _config_from_args(args)
    schemes = _parse_schemes(args.schemes)
    steps = _parse_steps(args.steps)
    rows = stability_study(cfg, schemes, steps)
    steps_sorted = sorted({r.h for r in rows}, reverse=True)
    print(f"{'scheme':8} " + " ".join(f"{h!r:>10}" for h in steps_sorted))
    by_key: dict[str, dict[float, bool]] = {}
    for r in rows:
        by_key.setdefault(r.key, {})[r.h] = r.stable
    for key in [SchemeSpec.parse(s).key for s in schemes]:
        cells = [("ok" if by_key[key].get(h) else "--") for h in steps_sorted]
        print(f"{key:8} " + " ".join(f"{c:>10}" for c in cells))
    if args.out:
        write_report_csv(args.out, rows)
        print(f"report written to {args.out}")
    return EXIT_OK


def cmd_cost(args) -> int:
    cfg = _config_from_args(args)
    schemes = _parse_schemes(args.schemes)
    steps = _parse_steps(args.steps)
    result = convergence_study(cfg, schemes, steps)
    chosen = cost_study(result.rows, args.target)
    print(f"cost at target error {args.target:.3e} (log-nearest stable row)")
    print(f"{'scheme':8} {'h':>12} {'e_inf':>13} {'cpu_s':>10} {'newton':>8}")
    for c in chosen:
        print(f"{c.key:8} {c.h!r:>12} {c.e_inf:>13.4e} {c.cpu_s:>10.4f} "
              f"{c.newton_iters:>8}")
    if args.out:
        write_report_csv(args.out, result.rows)
        print(f"full report written to {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ionstep-bench",
                     description="Benchmark stabilized multistep schemes on "
                                 "stiff ionic models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one scheme at one step size")
    _add_common(p_run)
    p_run.add_argument("--scheme", required=True,
                       help="scheme id, e.g. eab_3 or rl (with --order)")
    p_run.add_argument("--order", type=int, help="scheme order")
    p_run.add_argument("--h", type=float, help="step size in ms")
    p_run.add_argument("--m", type=int, help="number of steps")
    p_run.add_argument("--out", help="write the trajectory CSV here")
    p_run.set_defaults(func=cmd_run)

    p_ref = sub.add_parser("reference", help="build or load the reference")
    _add_common(p_ref)
    p_ref.add_argument("--h", type=float, help="base step size in ms")
    p_ref.add_argument("--m", type=int, help="base number of steps")
    p_ref.add_argument("--m-ref", type=int, dest="m_ref",
                       help="reference steps directly (overrides --h/--m)")
    p_ref.add_argument("--out", help="write the reference trajectory CSV here")
    p_ref.set_defaults(func=cmd_reference)

    p_conv = sub.add_parser("converge", help="error ladder and slope fits")
    _add_common(p_conv)
    p_conv.add_argument("--schemes", help="comma-separated scheme ids")
    p_conv.add_argument("--steps", help="comma-separated step sizes")
    p_conv.add_argument("--out", help="write the report CSV here")
    p_conv.add_argument("--expectations", nargs="?", const="builtin",
                        help="compare against the published table "
                             "(optionally a JSON file path)")
    p_conv.set_defaults(func=cmd_converge)

    p_stab = sub.add_parser("stability", help="divergence sweep")
    _add_common(p_stab)
    p_stab.add_argument("--schemes", help="comma-separated scheme ids")
    p_stab.add_argument("--steps", help="comma-separated step sizes")
    p_stab.add_argument("--out", help="write the report CSV here")
    p_stab.set_defaults(func=cmd_stability)

    p_cost = sub.add_parser("cost", help="accuracy-matched cost table")
    _add_common(p_cost)
    p_cost.add_argument("--schemes", help="comma-separated scheme ids")
    p_cost.add_argument("--steps", help="comma-separated step sizes")
    p_cost.add_argument("--target", type=float, default=1e-3,
                        help="error level to match (default 1e-3)")
    p_cost.add_argument("--out", help="write the full report CSV here")
    p_cost.set_defaults(func=cmd_cost)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
