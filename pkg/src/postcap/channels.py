"""Channel families whose state is the previous output.

Each family member is described by one column-stochastic matrix per
state, with the state set equal to the output alphabet.  Sequence-level
channel matrices p(y^n || x^n, s0) are assembled by a block recursion on
the first symbol: block (y1, x1) equals p(y1 | x1, s0) times the
length-(n-1) matrix started from state y1.  The binary families also
carry closed-form block inverses.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .probability import CausalKernel, SequencePmf
from .tolerances import tolerances

# Beyond this many matrix entries the sequence kernel must be sparse.
DENSE_ENTRY_CAP = 2**20


class SingularChannelError(ValueError):
    """The sequence-level channel matrix has no inverse."""


@dataclass(frozen=True)
class PostAlpha:
    """Binary channel: a Z channel after output 0, an S channel after output 1."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class PostAB:
    """Binary channel with per-state parameter pairs (a, b) and (b, a)."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0):
            raise ValueError("a and b must lie in [0, 1]")


@dataclass(frozen=True)
class MaryPost:
    """The (m+1)-ary channel whose edges carry probability 1/2 or 1.

    From any state below m, an input below m is delivered intact or
    replaced by m, each with probability 1/2, while input m always
    yields m.  From state m every input below m yields m, and input m
    resets the output to 0.
    """

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")


@dataclass(frozen=True)
class CustomPost:
    """Arbitrary per-state column-stochastic matrices; state = previous output."""

    state_matrices: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.state_matrices)
        if not mats:
            raise ValueError("at least one state matrix required")
        y, x = mats[0].shape
        if len(mats) != y:
            raise ValueError("state count must equal the output alphabet")
        for m in mats:
            if m.shape != (y, x):
                raise ValueError("state matrices must share one shape")
            if m.min() < -tolerances.entry_floor:
                raise ValueError("negative channel probability")
            if np.abs(m.sum(axis=0) - 1.0).max() > tolerances.conditional_row:
                raise ValueError("state matrices must be column-stochastic")
        frozen = []
        for m in mats:
            m = np.ascontiguousarray(m)
            m.setflags(write=False)
            frozen.append(m)
        object.__setattr__(self, "state_matrices", tuple(frozen))


def output_alphabet(spec):
    if isinstance(spec, (PostAlpha, PostAB)):
        return 2
    if isinstance(spec, MaryPost):
        return spec.m + 1
    if isinstance(spec, CustomPost):
        return spec.state_matrices[0].shape[0]
    raise TypeError(f"not a channel spec: {spec!r}")


def input_alphabet(spec):
    if isinstance(spec, CustomPost):
        return spec.state_matrices[0].shape[1]
    return output_alphabet(spec)


def state_class(spec, state):
    """Canonical representative of states with identical behavior."""
    if isinstance(spec, MaryPost) and state < spec.m:
        return 0
    return state


def initial_states(spec):
    """Initial states worth scanning (one per behavior class)."""
    k = output_alphabet(spec)
    if isinstance(spec, MaryPost):
        return (0, spec.m)
    return tuple(range(k))


def step_kernel(spec, state):
    """One-step matrix p(y | x, state); columns indexed by x, rows by y."""
    k = output_alphabet(spec)
    if not 0 <= state < k:
        raise ValueError(f"state {state} out of range")
    if isinstance(spec, PostAlpha):
        a = spec.alpha
        if state == 0:
            return np.array([[1.0, a], [0.0, 1.0 - a]])
        return np.array([[1.0 - a, 0.0], [a, 1.0]])
    if isinstance(spec, PostAB):
        a, b = spec.a, spec.b
        if state == 0:
            return np.array([[a, 1.0 - b], [1.0 - a, b]])
        return np.array([[b, 1.0 - a], [1.0 - b, a]])
    if isinstance(spec, MaryPost):
        m = spec.m
        out = np.zeros((k, k))
        if state < m:
            for x in range(m):
                out[x, x] = 0.5
                out[m, x] = 0.5
            out[m, m] = 1.0
        else:
            out[m, :m] = 1.0
            out[0, m] = 1.0
        return out
    if isinstance(spec, CustomPost):
        return np.array(spec.state_matrices[state])
    raise TypeError(f"not a channel spec: {spec!r}")


@dataclass(frozen=True)
class ChannelMatrix:
    """Sequence-level channel p(y^n || x^n, s0) with its build metadata."""

    spec: object
    n: int
    initial_state: int
    kernel: CausalKernel

    @property
    def is_sparse(self):
        return self.kernel.is_sparse


def build_sequence_kernel(spec, n, s0, storage="auto", dense_cap=DENSE_ENTRY_CAP):
    """Assemble p(y^n || x^n, s0) by the first-symbol block recursion."""
    if n < 1:
        raise ValueError("n must be positive")
    k = output_alphabet(spec)
    x = input_alphabet(spec)
    if not 0 <= s0 < k:
        raise ValueError(f"initial state {s0} out of range")
    entries = (k**n) * (x**n)
    if storage == "auto":
        storage = "dense" if entries <= dense_cap else "sparse"
    elif storage == "dense" and entries > dense_cap:
        raise ValueError(f"dense kernel would hold {entries} entries (cap {dense_cap})")
    elif storage not in ("dense", "sparse"):
        raise ValueError(f"unknown storage mode {storage!r}")

    classes = sorted({state_class(spec, s) for s in range(k)})
    steps = {c: step_kernel(spec, c) for c in classes}
    if storage == "dense":
        prev = {c: np.ones((1, 1)) for c in classes}
        for level in range(1, n + 1):
            cur = {}
            for c in classes:
                step = steps[c]
                rows, cols = k ** (level - 1), x ** (level - 1)
                out = np.zeros((k**level, x**level))
                for y1 in range(k):
                    block = prev[state_class(spec, y1)]
                    for x1 in range(x):
                        w = step[y1, x1]
                        if w:
                            out[
                                y1 * rows : (y1 + 1) * rows,
                                x1 * cols : (x1 + 1) * cols,
                            ] = w * block
                cur[c] = out
            prev = cur
    else:
        prev = {c: sp.csc_array(np.ones((1, 1))) for c in classes}
        for level in range(1, n + 1):
            cur = {}
            zero = sp.csc_array((k ** (level - 1), x ** (level - 1)))
            for c in classes:
                step = steps[c]
                blocks = []
                for y1 in range(k):
                    block = prev[state_class(spec, y1)]
                    row = []
                    for x1 in range(x):
                        w = step[y1, x1]
                        row.append(w * block if w else zero)
                    blocks.append(row)
                cur[c] = sp.block_array(blocks, format="csc")
            prev = cur
    values = prev[state_class(spec, s0)]
    kernel = CausalKernel(k, x, n, 0, values)
    return ChannelMatrix(spec, n, s0, kernel)


def invert_sequence_kernel(spec, n, s0):
    """Closed-form inverse of the sequence kernel for the binary families.

    Built by the same block recursion as the kernel itself, not by a
    generic linear solve.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if s0 not in (0, 1):
        raise ValueError("initial state out of range")
    if isinstance(spec, PostAlpha):
        alpha = spec.alpha
        if 1.0 - alpha <= 1e-12:
            raise SingularChannelError("alpha = 1 gives a singular channel")
        abar = 1.0 - alpha
        inv0 = inv1 = np.ones((1, 1))
        for _ in range(n):
            inv0, inv1 = (
                np.block([[inv0, -(alpha / abar) * inv1], [np.zeros_like(inv0), inv1 / abar]]),
                np.block([[inv0 / abar, np.zeros_like(inv0)], [-(alpha / abar) * inv0, inv1]]),
            )
        return inv0 if s0 == 0 else inv1
    if isinstance(spec, PostAB):
        a, b = spec.a, spec.b
        det = a + b - 1.0
        if det <= 1e-9:
            raise SingularChannelError("a + b - 1 must exceed 1e-9")
        inv0 = inv1 = np.ones((1, 1))
        for _ in range(n):
            inv0, inv1 = (
                np.block([[b * inv0, -(1.0 - b) * inv1], [-(1.0 - a) * inv0, a * inv1]]) / det,
                np.block([[a * inv0, -(1.0 - a) * inv1], [-(1.0 - b) * inv0, b * inv1]]) / det,
            )
        return inv0 if s0 == 0 else inv1
    raise TypeError("closed-form inverse exists only for the binary families")


def induced_output_pmf(spec, n, s0, input_kernel: CausalKernel) -> SequencePmf:
    """Output pmf p(y^n) = sum_x p(y^n || x^n, s0) p(x^n || y^{n-1})."""
    if input_kernel.delay != 1:
        raise ValueError("input kernel must have delay 1")
    k = output_alphabet(spec)
    x = input_alphabet(spec)
    if input_kernel.out_alphabet != x or input_kernel.in_alphabet != k:
        raise ValueError("alphabet mismatch")
    if input_kernel.n != n:
        raise ValueError("length mismatch")
    channel = build_sequence_kernel(spec, n, s0).kernel
    kin = input_kernel.dense_values()
    if channel.is_sparse:
        first = kin[:, 0]
        if kin.shape[1] > 1 and np.abs(kin - first[:, None]).max() > 0:
            raise ValueError("sparse channels support open-loop inputs only")
        py = channel.values @ first
    else:
        py = (channel.values * np.repeat(kin.T, k, axis=0)).sum(axis=1)
    return SequencePmf(k, n, py)


def spec_to_config(spec) -> str:
    """Plain-text form of a channel spec; decimal-exact round trip."""
    if isinstance(spec, PostAlpha):
        return f"family = post-alpha\nalpha = {spec.alpha!r}\n"
    if isinstance(spec, PostAB):
        return f"family = post-ab\na = {spec.a!r}\nb = {spec.b!r}\n"
    if isinstance(spec, MaryPost):
        return f"family = mary\nm = {spec.m}\n"
    raise TypeError("only the named families serialize to config text")


def spec_from_config(text: str):
    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value
    family = fields.pop("family", None)
    if family == "post-alpha":
        return PostAlpha(alpha=float(fields.pop("alpha")))
    if family == "post-ab":
        return PostAB(a=float(fields.pop("a")), b=float(fields.pop("b")))
    if family == "mary":
        return MaryPost(m=int(fields.pop("m")))
    raise ValueError(f"unknown channel family {family!r}")
