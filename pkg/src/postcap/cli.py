"""Command-line interface.

Subcommands: ``capacity`` (closed-form values with an optional numeric
cross-check), ``table1`` (the m-ary family's capacity table), ``sweep``
(CSV parameter sweeps for external plotting) and ``verify`` (numerical
verification suites).  Exit codes: 0 on success, 1 on a numerical
failure, 2 on bad usage.

Output files are deterministic: identical flags (including --seed)
produce byte-identical bytes.  POSTCAP_THREADS caps worker threads for
sweeps and table rows; ordering of the output never depends on it.
"""

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from .channels import MaryPost, PostAB, PostAlpha
from .closed_form import (
    binary_dmc_capacity,
    mary_feedback_capacity,
    mary_scheme_rate,
    post_alpha_capacity,
)
from .construction import (
    feedback_policy,
    inequality_sweep,
    output_markov_pmf,
    recursive_input_ab,
    recursive_input_alpha,
)
from .directed_info import concavity_probe
from .channels import build_sequence_kernel
from .optimize import OptimizerConfig, maximize_di_feedback, open_loop_match, upper_bound
from .probability import compose_causal, random_policy
from .tolerances import tolerances

# Reference values for the m-ary channel family, used by `table1 --check`:
# (upper bound at n=6, scheme rate, feedback capacity) per m.
TABLE1_REFERENCE = {
    1: (0.7918, 0.0000, 0.7595),
    2: (0.8568, 0.3333, 0.8325),
    4: (0.9803, 0.6667, 1.0000),
    8: (1.1711, 1.0000, 1.2599),
    16: (1.3865, 1.3333, 1.5366),
    32: (1.6098, 1.6667, 1.8260),
    64: (1.8374, 2.0000, 2.1252),
    128: (2.0683, 2.3333, 2.4319),
    256: (2.3019, 2.6667, 2.7444),
    512: (2.5376, 3.0000, 3.0614),
    1024: (2.7751, 3.3333, 3.3818),
}
CHECK_TOL_UPPER = 1.0e-3
CHECK_TOL_RATE = 5.0e-5
CHECK_TOL_FEEDBACK = 5.0e-4


def _worker_count():
    raw = os.environ.get("POSTCAP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _ordered_map(fn, items):
    workers = _worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _spec_from_args(parser, args):
    if args.target == "post-alpha":
        if args.alpha is None or not 0.0 <= args.alpha <= 1.0:
            parser.error("post-alpha requires --alpha in [0, 1]")
        return PostAlpha(args.alpha)
    if args.target == "post-ab":
        if args.a is None or args.b is None:
            parser.error("post-ab requires --a and --b")
        if not (0.0 <= args.a <= 1.0 and 0.0 <= args.b <= 1.0):
            parser.error("--a and --b must lie in [0, 1]")
        return PostAB(args.a, args.b)
    if args.target == "mary":
        if args.m is None or args.m < 1:
            parser.error("mary requires --m >= 1")
        return MaryPost(args.m)
    parser.error(f"unknown capacity target {args.target!r}")


def _closed_form_value(spec):
    if isinstance(spec, PostAlpha):
        return post_alpha_capacity(spec.alpha).capacity_bits
    if isinstance(spec, PostAB):
        return binary_dmc_capacity(spec.a, spec.b).capacity_bits
    return mary_feedback_capacity(spec.m).capacity_bits


def cmd_capacity(parser, args):
    spec = _spec_from_args(parser, args)
    closed = _closed_form_value(spec)
    print(f"capacity_bits: {closed:.6f}")
    if not args.numeric_check:
        return 0
    cfg = OptimizerConfig(max_iterations=args.max_iterations, kkt_tolerance=1e-7)
    _, value, report = maximize_di_feedback(spec, args.n, args.s0, cfg)
    gap = abs(value / args.n - closed)
    print(f"numeric_value_bits_per_use: {value / args.n:.6f}")
    print(f"numeric_gap: {gap:.3e}")
    print(f"kkt_passed: {report.passed}")
    print(f"kkt_implied_capacity_bits: {report.implied_capacity:.6f}")
    return 0 if (gap <= args.tol and report.passed) else 1


def _table1_rows(args):
    ms = []
    m = 1
    while m <= args.max_m:
        ms.append(m)
        m *= 2
    cfg = OptimizerConfig(max_iterations=50000, kkt_tolerance=1e-7)

    def row(m):
        ub = None
        if m <= args.upper_bound_max_m:
            ub = upper_bound(MaryPost(m), args.n, cfg)
        return (
            m,
            ub,
            mary_scheme_rate(m),
            mary_feedback_capacity(m).capacity_bits,
        )

    return _ordered_map(row, ms)


def cmd_table1(parser, args):
    cap = 8 if args.big else 4
    if args.upper_bound_max_m > cap:
        parser.error(
            f"--upper-bound-max-m is limited to {cap} at this scale"
            + ("" if args.big else " (use --big for up to 8)")
        )
    rows = _table1_rows(args)
    if args.format == "csv":
        lines = ["m,upper_bound,scheme_rate,feedback_capacity"]
        for m, ub, rate, fb in rows:
            ub_txt = "" if ub is None else f"{ub:.6f}"
            lines.append(f"{m},{ub_txt},{rate:.6f},{fb:.6f}")
        _write(args.out, "\n".join(lines) + "\n")
    else:
        payload = [
            {
                "m": m,
                "upper_bound": None if ub is None else round(ub, 6),
                "scheme_rate": round(rate, 6),
                "feedback_capacity": round(fb, 6),
            }
            for m, ub, rate, fb in rows
        ]
        _write(args.out, json.dumps(payload, indent=2) + "\n")
    if not args.check:
        return 0
    ok = True
    for m, ub, rate, fb in rows:
        ref = TABLE1_REFERENCE.get(m)
        if ref is None:
            continue
        ref_ub, ref_rate, ref_fb = ref
        if ub is not None and abs(ub - ref_ub) > CHECK_TOL_UPPER:
            print(f"check failed: m={m} upper_bound {ub:.6f} vs {ref_ub}", file=sys.stderr)
            ok = False
        if abs(rate - ref_rate) > CHECK_TOL_RATE:
            print(f"check failed: m={m} scheme_rate {rate:.6f} vs {ref_rate}", file=sys.stderr)
            ok = False
        if abs(fb - ref_fb) > CHECK_TOL_FEEDBACK:
            print(f"check failed: m={m} feedback {fb:.6f} vs {ref_fb}", file=sys.stderr)
            ok = False
    return 0 if ok else 1


def cmd_sweep(parser, args):
    if args.points < 2:
        parser.error("--points must be at least 2")
    grid = np.linspace(0.0, 1.0, args.points)
    if args.target == "alpha":
        values = _ordered_map(lambda a: post_alpha_capacity(a).capacity_bits, list(grid))
        lines = ["alpha,capacity_bits"]
        lines.extend(f"{a:.6f},{c:.6f}" for a, c in zip(grid, values))
    else:
        pairs = [(a, b) for a in grid for b in grid]
        sols = _ordered_map(lambda ab: binary_dmc_capacity(ab[0], ab[1]), pairs)
        lines = ["a,b,capacity_bits,gamma"]
        for (a, b), sol in zip(pairs, sols):
            gamma = "" if sol.degenerate else f"{sol.gamma:.6f}"
            lines.append(f"{a:.6f},{b:.6f},{sol.capacity_bits:.6f},{gamma}")
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def _binary_spec(parser, args):
    if args.family == "post-alpha":
        if not 0.0 < args.alpha < 1.0:
            parser.error("--alpha must lie in (0, 1)")
        return PostAlpha(args.alpha)
    if args.family == "post-ab":
        if not (0.0 <= args.a <= 1.0 and 0.0 <= args.b <= 1.0 and args.a + args.b > 1.0):
            parser.error("--a/--b must lie in [0, 1] with a + b > 1")
        return PostAB(args.a, args.b)
    parser.error(f"unknown family {args.family!r}")


def _verify_kkt(parser, args):
    spec = _binary_spec(parser, args)
    closed = _closed_form_value(spec)
    cfg = OptimizerConfig(max_iterations=args.max_iterations, kkt_tolerance=1e-7)
    _, value, report = maximize_di_feedback(spec, args.n, args.s0, cfg)
    return [
        ("kkt_certificate", max(report.max_violation_support, report.polyhedron_gap), report.passed),
        (
            "implied_vs_value",
            abs(report.implied_capacity - value),
            abs(report.implied_capacity - value) <= 1e-5,
        ),
        (
            "value_vs_closed_form",
            abs(value / args.n - closed),
            abs(value / args.n - closed) <= args.tol,
        ),
    ]


def _verify_construction(parser, args):
    spec = _binary_spec(parser, args)
    if isinstance(spec, PostAlpha):
        build = lambda s0: recursive_input_alpha(spec.alpha, args.n, s0)
        delta = post_alpha_capacity(spec.alpha).output_markov_transition
    else:
        build = lambda s0: recursive_input_ab(spec.a, spec.b, args.n, s0)
        delta = binary_dmc_capacity(spec.a, spec.b).output_markov_transition
    checks = []
    for s0 in (0, 1):
        pmf = build(s0)
        match = open_loop_match(spec, args.n, s0)
        solve_gap = float(np.abs(pmf.values - match.input_pmf.values).max())
        chan = build_sequence_kernel(spec, args.n, s0).kernel.values
        induced = chan @ pmf.values
        markov_gap = float(np.abs(induced - output_markov_pmf(delta, args.n, s0).values).max())
        consistency_gap = 0.0
        for i in range(1, args.n):
            shorter = (
                recursive_input_alpha(spec.alpha, i, s0)
                if isinstance(spec, PostAlpha)
                else recursive_input_ab(spec.a, spec.b, i, s0)
            )
            consistency_gap = max(
                consistency_gap,
                float(np.abs(pmf.prefix_marginal(i).values - shorter.values).max()),
            )
        checks.extend(
            [
                (f"s0={s0} input_valid", abs(match.total - 1.0), match.passed),
                (f"s0={s0} recursion_vs_solve", solve_gap, solve_gap <= 1e-10),
                (f"s0={s0} output_markov", markov_gap, markov_gap <= 1e-10),
                (f"s0={s0} horizon_consistency", consistency_gap, consistency_gap <= 1e-12),
            ]
        )
    return checks


def _verify_concavity(parser, args):
    spec = _binary_spec(parser, args)
    chan = build_sequence_kernel(spec, args.n, args.s0, storage="dense").kernel
    rng = np.random.default_rng(args.seed)
    worst = math.inf
    for _ in range(args.trials):
        p1 = compose_causal(random_policy(2, 2, args.n, 1, rng))
        p2 = compose_causal(random_policy(2, 2, args.n, 1, rng))
        lhs, rhs = concavity_probe(chan, p1, p2, 0.5)
        worst = min(worst, lhs - rhs)
    return [("midpoint_concavity", worst, worst >= -1e-12)]


def _verify_inequalities(parser, args):
    report = inequality_sweep(args.grid)
    return [(c.name, c.worst_margin, c.passed) for c in report.checks]


def cmd_verify(parser, args):
    suites = []
    if args.suite in ("kkt", "all"):
        suites.append(("kkt", _verify_kkt(parser, args)))
    if args.suite in ("construction", "all"):
        suites.append(("construction", _verify_construction(parser, args)))
    if args.suite in ("inequalities", "all"):
        suites.append(("inequalities", _verify_inequalities(parser, args)))
    if args.suite in ("concavity", "all"):
        suites.append(("concavity", _verify_concavity(parser, args)))
    all_ok = True
    for suite, checks in suites:
        for name, margin, ok in checks:
            status = "pass" if ok else "FAIL"
            print(f"{suite}/{name}: margin={margin:.6e} {status}")
            all_ok = all_ok and ok
    print("result: " + ("pass" if all_ok else "FAIL"))
    return 0 if all_ok else 1


def _apply_config(parser, path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            parser.error(f"config line is not key=value: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            tolerances.update(**{key: float(value)})
        except (KeyError, ValueError) as exc:
            parser.error(f"bad config entry {raw!r}: {exc}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="postcap",
        description="Capacities of channels whose state is the previous output.",
    )
    parser.add_argument("--config", help="key=value file overriding numerical tolerances")
    sub = parser.add_subparsers(dest="command", required=True)

    cap = sub.add_parser("capacity", help="closed-form capacity of one channel")
    cap.add_argument("target", choices=["post-alpha", "post-ab", "mary"])
    cap.add_argument("--alpha", type=float)
    cap.add_argument("--a", type=float)
    cap.add_argument("--b", type=float)
    cap.add_argument("--m", type=int)
    cap.add_argument("--numeric-check", action="store_true")
    cap.add_argument("--n", type=int, default=3, help="depth of the numeric check")
    cap.add_argument("--s0", type=int, default=0)
    cap.add_argument("--tol", type=float, default=1e-4)
    cap.add_argument("--max-iterations", type=int, default=20000)

    tab = sub.add_parser("table1", help="m-ary family capacity table")
    tab.add_argument("--n", type=int, default=6)
    tab.add_argument("--max-m", type=int, default=1024)
    tab.add_argument("--upper-bound-max-m", type=int, default=4)
    tab.add_argument("--big", action="store_true", help="allow the upper bound up to m=8")
    tab.add_argument("--out")
    tab.add_argument("--format", choices=["csv", "json"], default="csv")
    tab.add_argument("--check", action="store_true", help="compare against reference values")

    sw = sub.add_parser("sweep", help="parameter sweeps as CSV")
    sw.add_argument("target", choices=["alpha", "ab"])
    sw.add_argument("--points", type=int, default=101)
    sw.add_argument("--out")

    ver = sub.add_parser("verify", help="numerical verification suites")
    ver.add_argument("suite", choices=["kkt", "construction", "inequalities", "concavity", "all"])
    ver.add_argument("--family", choices=["post-alpha", "post-ab"], default="post-alpha")
    ver.add_argument("--alpha", type=float, default=0.5)
    ver.add_argument("--a", type=float, default=0.9)
    ver.add_argument("--b", type=float, default=0.7)
    ver.add_argument("--n", type=int, default=3)
    ver.add_argument("--s0", type=int, default=0)
    ver.add_argument("--grid", type=int, default=200)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--trials", type=int, default=100)
    ver.add_argument("--tol", type=float, default=1e-4)
    ver.add_argument("--max-iterations", type=int, default=20000)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(parser, args.config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.command == "capacity":
            return cmd_capacity(parser, args)
        if args.command == "table1":
            return cmd_table1(parser, args)
        if args.command == "sweep":
            return cmd_sweep(parser, args)
        if args.command == "verify":
            return cmd_verify(parser, args)
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
