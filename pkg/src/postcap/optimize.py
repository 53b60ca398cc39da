"""Maximization of directed information and its optimality certificates.

Two solvers are provided.  The feedback solver alternates between an
exact posterior update and an exact maximization of the surrogate
objective over the causal-input polyhedron; the latter is a backward
softmax recursion over input/output histories, so every iterate is a
valid causal kernel and the objective never decreases.  The open-loop
solver is the classic alternating maximization over plain input pmfs,
with a sparse path for large alphabets.

Certificates: a first-order report with one multiplier per output
context.  The inner expressions and the multipliers are computed in
nats; the implied capacity (sum of multipliers plus one) is converted
to bits once at the end.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channels import (
    SingularChannelError,
    PostAB,
    PostAlpha,
    build_sequence_kernel,
    initial_states,
    input_alphabet,
    invert_sequence_kernel,
    output_alphabet,
)
from .closed_form import binary_dmc_capacity, post_alpha_capacity
from .construction import output_markov_pmf
from .directed_info import _directed_information_arrays, directed_information
from .probability import (
    CausalKernel,
    SequencePmf,
    StepPolicy,
    compose_causal,
    index_sequence,
    open_loop_kernel,
)

LN2 = math.log(2.0)

# Input-kernel entries above this count as supported in the certificate.
SUPPORT_THRESHOLD = 1e-8

# Stand-in for log(0) when forming softmax utilities; large enough to
# zero the branch, small enough to avoid inf - inf.
LOG_ZERO = -1e3


@dataclass
class OptimizerConfig:
    """Iteration budget and tolerances shared by both solvers.

    kkt_tolerance is in nats and bounds both certificate violations (and
    the Gallager residual of the open-loop solver).
    """

    max_iterations: int = 5000
    kkt_tolerance: float = 1e-6
    objective_tolerance: float = 1e-14
    initialization: str = "uniform"
    seed: int = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.kkt_tolerance <= 0 or self.objective_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.initialization not in ("uniform", "random"):
            raise ValueError("initialization must be 'uniform' or 'random'")


@dataclass
class KktReport:
    """First-order optimality certificate for a feedback input kernel.

    beta maps each output context y^{n-1} to the support-weighted mean of
    the inner expression over that context (nats); implied_capacity is
    (sum of the multipliers + 1) converted to bits.

    The stationarity condition is checked on the per-input-sequence sum
    of the inner expression across output contexts: it must equal the
    multiplier total on supported sequences and not exceed it elsewhere.
    (The pointwise per-context form holds only at n = 1; for longer
    horizons the prefix-consistency constraints tie the contexts
    together, and only the across-context sum is pinned down.)
    polyhedron_gap is the exact first-order improvement available over
    the whole causal polyhedron, found by a backward max/sum recursion;
    it vanishes exactly at an optimum.  All three diagnostics are in
    nats and must fall below tol for the certificate to pass.
    """

    beta: dict
    max_violation_support: float
    max_violation_offsupport: float
    polyhedron_gap: float
    implied_capacity: float
    passed: bool
    tol: float
    note: str = ""

    def to_text(self):
        lines = [
            f"passed: {self.passed}",
            f"max_violation_support: {self.max_violation_support:.6e}",
            f"max_violation_offsupport: {self.max_violation_offsupport:.6e}",
            f"polyhedron_gap: {self.polyhedron_gap:.6e}",
            f"implied_capacity_bits: {self.implied_capacity:.9f}",
            f"tol: {self.tol:.3e}",
        ]
        for ctx, val in self.beta.items():
            label = "".join(str(s) for s in ctx) if ctx else "-"
            lines.append(f"beta_{label}: {val:.9f}")
        if self.note:
            lines.append(f"note: {self.note}")
        return "\n".join(lines) + "\n"


@dataclass
class MatchReport:
    """Validity of the open-loop input solved from the target output law."""

    min_entry: float
    total: float
    di_gap: float
    passed: bool
    input_pmf: SequencePmf = field(repr=False, default=None)

    def to_text(self):
        return (
            f"passed: {self.passed}\n"
            f"min_entry: {self.min_entry:.6e}\n"
            f"total: {self.total!r}\n"
            f"di_gap: {self.di_gap:.6e}\n"
        )


def _polyhedron_max(t, x_alph, y_alph, n):
    """max of <t, K> over causal kernels K, by backward max/sum recursion.

    Contexts enter the inner product unweighted, so the recursion
    maximizes over each input symbol and sums over output branches.
    """
    util = t
    for i in range(n, 0, -1):
        best = util.reshape(x_alph ** (i - 1), x_alph, y_alph ** (i - 1)).max(axis=1)
        if i == 1:
            return float(best[0, 0])
        util = best.reshape(x_alph ** (i - 1), y_alph ** (i - 2), y_alph).sum(axis=2)
    return float(util[0, 0])


def _kkt_arrays(kin, chan, x_alph, y_alph, n, tol):
    """Certificate from raw arrays: kin (X^n, Y^(n-1)), chan (Y^n, X^n)."""
    n_rows, n_ctx = kin.shape
    joint = chan * np.repeat(kin.T, y_alph, axis=0)
    py = joint.sum(axis=1)
    pos = chan > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_c = np.where(pos, np.log(chan, where=pos, out=np.zeros_like(chan)), 0.0)
        ln_py = np.where(py > 0, np.log(py, where=py > 0, out=np.zeros_like(py)), 0.0)
    inner = np.where(pos, chan * (ln_c - ln_py[:, None] - 1.0), 0.0)
    t = inner.reshape(n_ctx, y_alph, n_rows).sum(axis=1).T  # (X^n, Y^(n-1))
    undefined = (pos & (py == 0.0)[:, None]).reshape(n_ctx, y_alph, n_rows).any(axis=1).T

    support = kin > SUPPORT_THRESHOLD
    weights = np.where(support, kin, 0.0)
    beta = (weights * np.where(undefined, 0.0, t)).sum(axis=0) / weights.sum(axis=0)
    total = float(beta.sum())

    note = ""
    t_eff = np.where(undefined, math.inf, t)
    row_sums = t_eff.sum(axis=1)
    full_support = support.all(axis=1)
    max_support = 0.0
    if full_support.any():
        max_support = float(np.abs(row_sums[full_support] - total).max())
    max_off = 0.0
    if (~full_support).any():
        max_off = max(0.0, float((row_sums[~full_support] - total).max()))
    gap = max(0.0, _polyhedron_max(t_eff, x_alph, y_alph, n) - total)
    if undefined.any():
        x_idx, c_idx = np.argwhere(undefined)[0]
        note = (
            "zero output probability on a sequence reachable from input "
            f"row {x_idx} (context {c_idx})"
        )
        if (undefined & support).any():
            x_idx, c_idx = np.argwhere(undefined & support)[0]
            max_support = math.inf
            note = (
                "undefined inner term: zero output probability reachable "
                f"from supported input row {x_idx} (context {c_idx})"
            )

    ctx_len = round(math.log(n_ctx, y_alph)) if n_ctx > 1 else 0
    beta_map = {index_sequence(j, y_alph, ctx_len): float(beta[j]) for j in range(n_ctx)}
    implied = (total + 1.0) / LN2
    passed = max_support <= tol and max_off <= tol and gap <= tol
    return KktReport(beta_map, max_support, max_off, gap, implied, passed, tol, note)


def kkt_check(input_kernel: CausalKernel, spec, n, s0, tol=1e-6) -> KktReport:
    """First-order certificate of the input kernel against the channel."""
    chan = build_sequence_kernel(spec, n, s0, storage="dense").kernel
    if input_kernel.n != n or input_kernel.out_alphabet != chan.in_alphabet:
        raise ValueError("input kernel does not match the channel")
    return _kkt_arrays(
        input_kernel.values, chan.values, chan.in_alphabet, chan.out_alphabet, n, tol
    )


def _channel_step_conditionals(chan, x_alph, y_alph, n):
    """Per-step p(y_k | y^{k-1}, x^k) tables for k = 1..n-1.

    prefix[k] is the length-k channel kernel obtained by summing output
    tails; its value does not depend on the input tail, so one column
    per input prefix is kept.
    """
    prefix = [None] * (n + 1)
    prefix[n] = chan
    for k in range(n, 0, -1):
        reduced = prefix[k].reshape(y_alph ** (k - 1), y_alph, x_alph**k).sum(axis=1)
        prefix[k - 1] = reduced.reshape(y_alph ** (k - 1), x_alph ** (k - 1), x_alph)[:, :, 0]
    levels = []
    for k in range(1, n):
        num = prefix[k].reshape(y_alph ** (k - 1), y_alph, x_alph**k)
        den = np.repeat(prefix[k - 1], x_alph, axis=1)[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        levels.append(cond)
    return levels


def _surrogate_input_step(chan, joint, py, x_alph, y_alph, n, step_conds):
    """Exact maximizer of the surrogate objective for a fixed posterior.

    Builds per-history utilities from the posterior of the current joint
    and solves the resulting softmax recursion backwards; returns the
    composed causal kernel.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        post = np.where(py[:, None] > 0, joint / np.where(py[:, None] > 0, py[:, None], 1.0), 0.0)
        ln_post = np.where(post > 0, np.log(post, where=post > 0, out=np.zeros_like(post)), LOG_ZERO)
    pos = chan > 0
    gains = np.where(pos, chan * ln_post, 0.0)
    n_ctx = y_alph ** (n - 1)
    r = gains.reshape(n_ctx, y_alph, x_alph**n).sum(axis=1).T
    w = chan.reshape(n_ctx, y_alph, x_alph**n).sum(axis=1).T
    with np.errstate(divide="ignore", invalid="ignore"):
        util = np.where(w > 0, r / np.where(w > 0, w, 1.0), 0.0)

    steps = [None] * n
    for i in range(n, 0, -1):
        shaped = util.reshape(x_alph ** (i - 1), x_alph, y_alph ** (i - 1))
        value = logsumexp(shaped, axis=1)
        steps[i - 1] = np.exp(shaped - value[:, None, :]).transpose(0, 2, 1)
        if i > 1:
            cond = step_conds[i - 2]  # (Y^(i-2), Y, X^(i-1))
            v_shaped = value.reshape(x_alph ** (i - 1), y_alph ** (i - 2), y_alph)
            util = (cond.transpose(2, 0, 1) * v_shaped).sum(axis=2)
    policy = StepPolicy(x_alph, y_alph, n, 1, tuple(steps))
    return compose_causal(policy).values


def _initial_kernel(spec, n, cfg):
    x_alph = input_alphabet(spec)
    y_alph = output_alphabet(spec)
    if cfg.initialization == "uniform":
        values = np.full((x_alph**n, y_alph ** (n - 1)), x_alph ** (-float(n)))
        return CausalKernel(x_alph, y_alph, n, 1, values)
    rng = np.random.default_rng(cfg.seed)
    steps = []
    for i in range(1, n + 1):
        raw = rng.uniform(0.05, 1.0, size=(x_alph ** (i - 1), y_alph ** (i - 1), x_alph))
        steps.append(raw / raw.sum(axis=-1, keepdims=True))
    return compose_causal(StepPolicy(x_alph, y_alph, n, 1, tuple(steps)))


def maximize_di_feedback(spec, n, s0, cfg: OptimizerConfig = None):
    """Maximize directed information over causal input kernels.

    Returns (kernel, value in bits, certificate).  Iterates until the
    certificate passes at cfg.kkt_tolerance; if the iteration budget is
    exhausted the best iterate is returned with its failing certificate.
    """
    cfg = cfg or OptimizerConfig()
    chan = build_sequence_kernel(spec, n, s0, storage="dense").kernel
    x_alph, y_alph = chan.in_alphabet, chan.out_alphabet
    step_conds = _channel_step_conditionals(chan.values, x_alph, y_alph, n)

    kin = _initial_kernel(spec, n, cfg).values
    best = (-math.inf, kin, None)
    prev = -math.inf
    stall = 0
    for _ in range(cfg.max_iterations):
        value, joint, py = _directed_information_arrays(kin, chan.values, y_alph)
        if value < prev - 1e-11:
            raise RuntimeError(f"objective decreased from {prev!r} to {value!r}")
        report = _kkt_arrays(kin, chan.values, x_alph, y_alph, n, cfg.kkt_tolerance)
        if value > best[0]:
            best = (value, kin, report)
        if report.passed:
            kernel = CausalKernel(x_alph, y_alph, n, 1, kin)
            return kernel, value, report
        stall = stall + 1 if abs(value - prev) < cfg.objective_tolerance else 0
        if stall >= 25:
            break
        prev = value
        kin = _surrogate_input_step(chan.values, joint, py, x_alph, y_alph, n, step_conds)

    value, kin, report = best
    warnings.warn(
        f"feedback solver stopped without a passing certificate "
        f"(support violation {report.max_violation_support:.3e}, "
        f"off-support violation {report.max_violation_offsupport:.3e})"
    )
    return CausalKernel(x_alph, y_alph, n, 1, kin), value, report


def maximize_mi_nofeedback(spec, n, s0, cfg: OptimizerConfig = None):
    """Maximize I(X^n; Y^n | s0) over plain input pmfs.

    Classic alternating maximization on the sequence-level channel; the
    stopping rule bounds the one-shot optimality residual (difference
    between the largest per-input divergence and the achieved value) by
    cfg.kkt_tolerance nats.  Returns (pmf, value in bits).
    """
    cfg = cfg or OptimizerConfig()
    cm = build_sequence_kernel(spec, n, s0)
    chan = cm.kernel.values
    x_alph = input_alphabet(spec)
    size = x_alph**n
    sparse = cm.kernel.is_sparse
    if sparse:
        chan_t = chan.T.tocsr()
        logs = chan.copy()
        logs.data = chan.data * np.log(chan.data)
        const = np.asarray(logs.sum(axis=0)).ravel()
    else:
        pos = chan > 0
        with np.errstate(divide="ignore"):
            const = np.where(pos, chan * np.log(chan, where=pos, out=np.zeros_like(chan)), 0.0).sum(
                axis=0
            )

    if cfg.initialization == "random":
        rng = np.random.default_rng(cfg.seed)
        p = rng.uniform(0.05, 1.0, size)
        p /= p.sum()
    else:
        p = np.full(size, 1.0 / size)

    prev = -math.inf
    value = 0.0
    converged = False
    for _ in range(cfg.max_iterations):
        q = chan @ p
        ln_q = np.where(q > 0, np.log(q, where=q > 0, out=np.zeros_like(q)), 0.0)
        divergences = const - (chan_t @ ln_q if sparse else chan.T @ ln_q)
        value = float(p @ divergences)
        if value < prev - 1e-11:
            raise RuntimeError(f"objective decreased from {prev!r} to {value!r}")
        prev = value
        if float(divergences.max()) - value <= cfg.kkt_tolerance:
            converged = True
            break
        log_p = np.where(p > 0, np.log(p, where=p > 0, out=np.zeros_like(p)), LOG_ZERO)
        log_p += divergences
        log_p -= logsumexp(log_p)
        p = np.exp(log_p)
    if not converged:
        warnings.warn(
            f"open-loop solver hit the iteration cap with residual "
            f"{float(divergences.max()) - value:.3e} nats"
        )
    return SequencePmf(x_alph, n, p), value / LN2


def upper_bound(spec, n, cfg: OptimizerConfig = None) -> float:
    """Best per-use mutual information over initial states, in bits."""
    best = -math.inf
    for s0 in initial_states(spec):
        _, value = maximize_mi_nofeedback(spec, n, s0, cfg)
        best = max(best, value)
    return best / n


def open_loop_match(
    spec, n, s0, min_entry_tol=1e-10, sum_tol=1e-9, di_gap_tol=1e-8
) -> MatchReport:
    """Solve for the open-loop input that induces the feedback-optimal output.

    The target output law is the symmetric Markov chain of the family's
    closed form; the input is recovered through the closed-form inverse
    of the sequence kernel and checked for validity and for attaining
    n times the closed-form capacity.
    """
    if isinstance(spec, PostAlpha):
        sol = post_alpha_capacity(spec.alpha)
        delta = sol.output_markov_transition
        capacity = sol.capacity_bits
    elif isinstance(spec, PostAB):
        sol = binary_dmc_capacity(spec.a, spec.b)
        if sol.degenerate or sol.relabeled:
            raise SingularChannelError("requires a + b > 1")
        delta = sol.output_markov_transition
        capacity = sol.capacity_bits
    else:
        raise TypeError("open-loop matching applies to the binary families")

    target = output_markov_pmf(delta, n, s0)
    inverse = invert_sequence_kernel(spec, n, s0)
    raw = inverse @ target.values
    min_entry = float(raw.min())
    total = float(raw.sum())

    pmf = SequencePmf(2, n, np.maximum(raw, 0.0) / total)
    chan = build_sequence_kernel(spec, n, s0, storage="dense").kernel
    di = directed_information(open_loop_kernel(pmf, 2), chan)
    di_gap = abs(di - n * capacity)
    passed = min_entry >= -min_entry_tol and abs(total - 1.0) <= sum_tol and di_gap <= di_gap_tol
    return MatchReport(min_entry, total, di_gap, passed, pmf)
