"""Directed information between input kernels and channel kernels.

All quantities are returned in bits.  Sums run over the nonzero terms of
the joint (0 log 0 = 0) and are accumulated with compensated summation
so the per-step decomposition identity holds to ~1e-12 even at n = 8.
"""

import math

import numpy as np

from .channels import build_sequence_kernel, input_alphabet, output_alphabet
from .probability import CausalKernel, SequencePmf, open_loop_kernel


def _check_pair(input_kernel, channel):
    if input_kernel.delay != 1 or channel.delay != 0:
        raise ValueError("expected an input kernel (d=1) and a channel kernel (d=0)")
    if input_kernel.n != channel.n:
        raise ValueError("length mismatch")
    if (
        channel.in_alphabet != input_kernel.out_alphabet
        or channel.out_alphabet != input_kernel.in_alphabet
    ):
        raise ValueError("alphabet mismatch")
    if input_kernel.is_sparse or channel.is_sparse:
        raise ValueError("directed information requires dense kernels")


def _joint_and_output(kin, chan, y):
    """Joint p(x^n, y^n) indexed [y, x] and the output marginal."""
    joint = chan * np.repeat(kin.T, y, axis=0)
    return joint, joint.sum(axis=1)


def _directed_information_arrays(kin, chan, y):
    joint, py = _joint_and_output(kin, chan, y)
    mask = joint > 0
    with np.errstate(divide="ignore"):
        terms = joint[mask] * (np.log2(chan[mask]) - np.log2(np.broadcast_to(py[:, None], joint.shape)[mask]))
    value = math.fsum(terms)
    if -1e-12 < value < 0.0:
        value = 0.0
    return value, joint, py


def directed_information(input_kernel: CausalKernel, channel: CausalKernel) -> float:
    """I(X^n -> Y^n) in bits for a feedback input law and a channel."""
    _check_pair(input_kernel, channel)
    value, _, _ = _directed_information_arrays(
        input_kernel.values, channel.values, channel.out_alphabet
    )
    return value


def directed_information_stepwise(input_kernel: CausalKernel, channel: CausalKernel):
    """Per-step terms I(X^i; Y_i | Y^{i-1}); they sum to the total."""
    _check_pair(input_kernel, channel)
    x, y, n = input_kernel.out_alphabet, channel.out_alphabet, channel.n
    joint, _ = _joint_and_output(input_kernel.values, channel.values, y)
    terms = []
    for i in range(1, n + 1):
        m = joint.reshape(y**i, y ** (n - i), x**i, x ** (n - i)).sum(axis=(1, 3))
        m3 = m.reshape(y ** (i - 1), y, x**i)
        d = m3.sum(axis=1, keepdims=True)  # p(y^{i-1}, x^i)
        p_i = m3.sum(axis=2, keepdims=True)  # p(y^i)
        p_prev = p_i.sum(axis=1, keepdims=True)  # p(y^{i-1})
        mask = m3 > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            logterm = (
                np.log2(m3, where=mask, out=np.zeros_like(m3))
                + np.log2(p_prev, where=p_prev > 0, out=np.zeros_like(p_prev))
                - np.log2(d, where=d > 0, out=np.zeros_like(d))
                - np.log2(p_i, where=p_i > 0, out=np.zeros_like(p_i))
            )
        val = math.fsum((m3 * logterm)[mask])
        terms.append(0.0 if -1e-12 < val < 0.0 else val)
    return np.array(terms)


def mutual_information_given_state(spec, n, s0, input_pmf: SequencePmf) -> float:
    """I(X^n; Y^n | s0) for an input that ignores the feedback, in bits."""
    if input_pmf.n != n or input_pmf.alphabet_size != input_alphabet(spec):
        raise ValueError("input pmf does not match the channel")
    channel = build_sequence_kernel(spec, n, s0, storage="dense").kernel
    kin = open_loop_kernel(input_pmf, output_alphabet(spec))
    return directed_information(kin, channel)


def concavity_probe(channel: CausalKernel, p1: CausalKernel, p2: CausalKernel, theta: float):
    """Value at the mixture versus the mixed values, for concavity checks.

    Returns (lhs, rhs) with lhs the directed information of the
    theta-mixture of the two input kernels; concavity means lhs >= rhs.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if p1.values.shape != p2.values.shape:
        raise ValueError("input kernels must share one shape")
    mix = CausalKernel(
        p1.out_alphabet,
        p1.in_alphabet,
        p1.n,
        1,
        theta * p1.values + (1.0 - theta) * p2.values,
    )
    lhs = directed_information(mix, channel)
    rhs = theta * directed_information(p1, channel) + (1.0 - theta) * directed_information(
        p2, channel
    )
    return lhs, rhs
