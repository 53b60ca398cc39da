"""Recursive constructions and their supporting feasibility checks.

The symmetric-Markov output pmf and the open-loop input pmfs of the
binary families are built by two-block vector recursions; nonnegativity
of the inputs is certified by locating a multiplier beta inside a set of
closed intervals, and the inequalities backing those intervals are
swept numerically on parameter grids.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import PostAB, PostAlpha
from .closed_form import _alpha_powers, binary_dmc_capacity, post_alpha_capacity
from .probability import SequencePmf, StepPolicy, binary_entropy


def output_markov_pmf(delta, n, s0) -> SequencePmf:
    """Pmf of n steps of the symmetric binary Markov chain started at s0."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if s0 not in (0, 1):
        raise ValueError("s0 must be 0 or 1")
    p0 = p1 = np.ones(1)
    for _ in range(n):
        p0, p1 = (
            np.concatenate([(1.0 - delta) * p0, delta * p1]),
            np.concatenate([delta * p0, (1.0 - delta) * p1]),
        )
    return SequencePmf(2, n, p0 if s0 == 0 else p1)


def _recursion_chain_alpha(alpha, n):
    """Both open-loop input chains of the Z/S family, level by level."""
    paa, pa1 = _alpha_powers(alpha)
    c = 1.0 / (1.0 + (1.0 - alpha) * paa)
    p0 = p1 = np.ones(1)
    levels = []
    for _ in range(n):
        p0, p1 = (
            c * np.concatenate([p0 - pa1 * p1, paa * p1]),
            c * np.concatenate([paa * p0, p1 - pa1 * p0]),
        )
        levels.append((p0, p1))
    return levels


def _recursion_chain_ab(a, b, n):
    if a + b - 1.0 <= 1e-9:
        raise ValueError("requires a + b - 1 > 1e-9")
    gamma = 2.0 ** ((binary_entropy(b) - binary_entropy(a)) / (a + b - 1.0))
    f = 1.0 / ((a + b - 1.0) * (gamma + 1.0))
    abar, bbar = 1.0 - a, 1.0 - b
    p0 = p1 = np.ones(1)
    levels = []
    for _ in range(n):
        p0, p1 = (
            f * np.concatenate([b * gamma * p0 - bbar * p1, -abar * gamma * p0 + a * p1]),
            f * np.concatenate([a * p0 - abar * gamma * p1, -bbar * p0 + b * gamma * p1]),
        )
        levels.append((p0, p1))
    return levels


def recursive_input_alpha(alpha, n, s0) -> SequencePmf:
    """Open-loop input whose output matches the feedback-optimal chain."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be positive")
    if s0 not in (0, 1):
        raise ValueError("s0 must be 0 or 1")
    p0, p1 = _recursion_chain_alpha(alpha, n)[-1]
    return SequencePmf(2, n, p0 if s0 == 0 else p1)


def recursive_input_ab(a, b, n, s0) -> SequencePmf:
    """Open-loop input for the (a, b) family; requires a + b > 1."""
    if n < 1:
        raise ValueError("n must be positive")
    if s0 not in (0, 1):
        raise ValueError("s0 must be 0 or 1")
    p0, p1 = _recursion_chain_ab(a, b, n)[-1]
    return SequencePmf(2, n, p0 if s0 == 0 else p1)


def _quad_roots(lead, mid, const):
    """Roots of lead*t^2 - mid*t + const = 0 (mid > 0), cancellation-free.

    Returns (smaller, larger); with lead = 0 the larger root is +inf.
    """
    disc = mid * mid - 4.0 * lead * const
    if disc < 0:
        raise ValueError("negative discriminant")
    s = mid + math.sqrt(disc)
    small = 2.0 * const / s
    with np.errstate(divide="ignore"):
        large = math.inf if lead == 0.0 else s / (2.0 * lead)
    return small, large


def _intersect(*intervals):
    lo, hi = 0.0, math.inf
    for iv in intervals:
        if iv is None:
            return None
        lo, hi = max(lo, iv[0]), min(hi, iv[1])
    return (lo, hi) if lo <= hi else None


def _interval(lo, hi):
    return (lo, hi) if lo <= hi else None


@dataclass(frozen=True)
class IntervalSet:
    """The seven beta-feasibility intervals and a point in their required overlap."""

    l0: Optional[tuple]
    l1: Optional[tuple]
    l2: Optional[tuple]
    l3: Optional[tuple]
    l4: Optional[tuple]
    l5: Optional[tuple]
    l6: Optional[tuple]
    nonempty_witness: Optional[float]

    def to_text(self):
        lines = []
        for i in range(7):
            iv = getattr(self, f"l{i}")
            lines.append(f"l{i}: {'empty' if iv is None else f'[{iv[0]:.12g}, {iv[1]:.12g}]'}")
        w = self.nonempty_witness
        lines.append(f"witness: {'none' if w is None else f'{w:.12g}'}")
        return "\n".join(lines) + "\n"


def beta_interval_alpha(alpha):
    """Closed multiplier interval certifying nonnegativity for the Z/S family."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    paa, pa1 = _alpha_powers(alpha)
    disc = 1.0 - 4.0 * paa * pa1
    if disc < 0:
        raise ValueError("negative discriminant")
    s = 1.0 + math.sqrt(disc)
    return s / (2.0 * paa), s / (2.0 * pa1)


def beta_intervals_ab(a, b) -> IntervalSet:
    """All seven intervals for the (a, b) family, plus a witness multiplier.

    The witness is searched in the overlap the constructive argument
    needs: l1 with l5 when a*(1-a) <= b*(1-b), else l2 with l6, both
    intersected with l0.
    """
    if a + b - 1.0 < -1e-9:
        a, b = 1.0 - a, 1.0 - b
    if a + b - 1.0 <= 1e-9:
        raise ValueError("requires a + b != 1")
    abar, bbar = 1.0 - a, 1.0 - b
    gamma = 2.0 ** ((binary_entropy(b) - binary_entropy(a)) / (a + b - 1.0))

    r1m, r1p = _quad_roots(bbar, gamma * (abar + b), a)
    r2m, r2p = _quad_roots(b * gamma, a + bbar, abar * gamma)
    r4m, r4p = _quad_roots(a, gamma * (abar + b), bbar)
    r6m, r6p = _quad_roots(abar * gamma, a + bbar, b * gamma)
    with np.errstate(divide="ignore"):
        ratio12 = math.inf if bbar == 0.0 else abar * gamma / bbar
        ratio56 = b * gamma / a
        cap0 = min(
            math.inf if abar == 0.0 else a / (abar * gamma),
            math.inf if bbar == 0.0 else b * gamma / bbar,
        )

    l0 = _interval(1.0, cap0)
    l1 = _interval(max(ratio12, r1m), r1p)
    l2 = _interval(r2p, ratio12)
    l3 = _interval(0.0, min(ratio12, r2m))
    l4 = _interval(0.0, min(ratio56, r4m))
    l5 = _interval(r4p, ratio56)
    l6 = _interval(max(ratio56, r6m), r6p)

    if a * abar <= b * bbar:
        target = _intersect(l1, l5, l0)
    else:
        target = _intersect(l2, l6, l0)
    if target is None:
        # fall back to the full union-intersection condition
        for left in (l1, l2, l3):
            for right in (l4, l5, l6):
                target = _intersect(left, right, l0)
                if target is not None:
                    break
            if target is not None:
                break
    witness = None
    if target is not None:
        lo, hi = target
        witness = lo if math.isinf(hi) else 0.5 * (lo + hi)
    return IntervalSet(l0, l1, l2, l3, l4, l5, l6, witness)


def induction_step_check(spec, beta, n, slack=1e-12) -> bool:
    """Entrywise beta-domination between the two input chains up to level n."""
    if isinstance(spec, PostAlpha):
        levels = _recursion_chain_alpha(spec.alpha, n)
    elif isinstance(spec, PostAB):
        levels = _recursion_chain_ab(spec.a, spec.b, n)
    else:
        raise TypeError("induction check applies to the binary families")
    for p0, p1 in levels:
        if (beta * p1 - p0).min() < -slack or (beta * p0 - p1).min() < -slack:
            return False
    return True


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    hypothesis: str
    worst_margin: float
    passed: bool


@dataclass
class InequalityReport:
    grid_size: int
    slack: float
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_text(self):
        lines = [f"grid_size: {self.grid_size}", f"slack: {self.slack:.3e}"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name} [{c.hypothesis}]: worst_margin={c.worst_margin:.6e} {status}")
        lines.append(f"passed: {self.passed}")
        return "\n".join(lines) + "\n"

    def to_csv(self):
        rows = ["name,hypothesis,worst_margin,passed"]
        rows.extend(
            f"{c.name},{c.hypothesis},{c.worst_margin:.12e},{int(c.passed)}" for c in self.checks
        )
        return "\n".join(rows) + "\n"


def inequality_sweep(grid_size=200, slack=1e-12) -> InequalityReport:
    """Evaluate every supporting inequality on open parameter grids.

    One-parameter inequalities are swept over alpha in (0, 1); the
    two-parameter ones over (a, b) with a + b > 1, restricted further to
    each inequality's stated hypothesis.
    """
    if grid_size < 10:
        raise ValueError("grid_size must be at least 10")
    report = InequalityReport(grid_size, slack)

    alphas = np.linspace(0.0, 1.0, grid_size + 2)[1:-1]
    paa = np.exp(alphas * np.log(alphas) / (1.0 - alphas))
    pa1 = np.exp(np.log(alphas) / (1.0 - alphas))
    quad = 4.0 * paa * pa1  # alpha**((alpha+1)/(1-alpha)) times 4

    def add(name, hypothesis, margins):
        worst = float(np.min(margins)) if np.size(margins) else math.inf
        report.checks.append(InequalityCheck(name, hypothesis, worst, worst >= -slack))

    add("alpha_pow_inv_abar_le_1", "alpha in (0,1)", 1.0 - pa1)
    add("four_alpha_pow_le_1", "alpha in (0,1)", 1.0 - quad)
    add(
        "beta_lower_root_ge_1",
        "alpha in (0,1)",
        (1.0 + np.sqrt(np.maximum(1.0 - quad, 0.0))) / (2.0 * paa) - 1.0,
    )

    axis = np.linspace(0.0, 1.0, grid_size + 2)[1:-1]
    a, b = np.meshgrid(axis, axis, indexing="ij")
    base = a + b - 1.0 > 1e-9
    a, b = a[base], b[base]
    abar, bbar = 1.0 - a, 1.0 - b
    ha = -(a * np.log2(a) + abar * np.log2(abar))
    hb = -(b * np.log2(b) + bbar * np.log2(bbar))
    gamma = 2.0 ** ((hb - ha) / (a + b - 1.0))
    balanced = a * abar <= b * bbar

    disc1 = gamma**2 * (abar + b) ** 2 - 4.0 * a * bbar
    add("gamma_sq_discriminant", "a+b>1", disc1)
    add("gamma_sq_discriminant_swapped", "a+b>1", (a + bbar) ** 2 - 4.0 * abar * b * gamma**2)
    add("a_ge_b", "a+b>1, a*abar<=b*bbar", (a - b)[balanced])
    add(
        "lower_root_le_two_bbar",
        "a+b>1, a*abar<=b*bbar",
        (2.0 * bbar - (gamma * (abar + b) - np.sqrt(np.maximum(disc1, 0.0))))[balanced],
    )
    add("b_gamma_over_a_ge_1", "a+b>1, a*abar<=b*bbar", (b * gamma / a - 1.0)[balanced])
    add("gamma_sq_le_a_sq_over_b_abar", "a+b>1", a**2 / (b * abar) - gamma**2)
    add(
        "gamma_abar_plus_b_ge_two_bbar",
        "a+b>1, a*abar<=b*bbar",
        (gamma * (abar + b) / (2.0 * bbar) - 1.0)[balanced],
    )
    add("gamma_ge_bbar_over_b", "a+b>1", gamma - bbar / b)
    add("gamma_le_a_over_abar", "a+b>1", a / abar - gamma)
    return report


def feedback_policy(spec, n, s0) -> StepPolicy:
    """Capacity-achieving feedback policy: one input law per channel state.

    Step 1 uses the initial state; later steps condition on the previous
    output only.  The state-1 law is the state-0 law with the input
    labels swapped.
    """
    if isinstance(spec, PostAlpha):
        base = post_alpha_capacity(spec.alpha).input_pmf
    elif isinstance(spec, PostAB):
        sol = binary_dmc_capacity(spec.a, spec.b)
        if sol.degenerate or sol.relabeled:
            raise ValueError("requires a + b > 1")
        base = sol.input_pmf
    else:
        raise TypeError("feedback policy applies to the binary families")
    if s0 not in (0, 1):
        raise ValueError("s0 must be 0 or 1")
    by_state = np.array([base, base[::-1]])
    steps = [by_state[s0].reshape(1, 1, 2)]
    for i in range(2, n + 1):
        last = np.arange(2 ** (i - 1)) % 2  # least-significant symbol of y^{i-1}
        step = by_state[last].reshape(1, 2 ** (i - 1), 2)
        steps.append(np.broadcast_to(step, (2 ** (i - 1), 2 ** (i - 1), 2)).copy())
    return StepPolicy(2, 2, n, 1, tuple(steps))
