"""Capacities of channels whose state is the previous output.

Library layout: ``probability`` (sequence pmfs, causal kernels and
information measures), ``channels`` (channel families and sequence-level
matrices), ``directed_info`` (directed-information functionals),
``closed_form`` (analytic capacities), ``construction`` (recursive input
constructions and feasibility intervals), ``optimize`` (solvers and
optimality certificates) and ``cli`` (the postcap command).
"""

from .channels import (
    ChannelMatrix,
    CustomPost,
    MaryPost,
    PostAB,
    PostAlpha,
    SingularChannelError,
    build_sequence_kernel,
    induced_output_pmf,
    initial_states,
    input_alphabet,
    invert_sequence_kernel,
    output_alphabet,
    spec_from_config,
    spec_to_config,
    step_kernel,
)
from .closed_form import (
    MaryFeedbackSolution,
    PostABSolution,
    PostAlphaSolution,
    binary_dmc_capacity,
    iid_state_example,
    mary_feedback_capacity,
    mary_output_chain,
    mary_scheme_rate,
    mary_state_policy,
    mary_stationary_distribution,
    post_alpha_capacity,
)
from .construction import (
    IntervalSet,
    InequalityReport,
    beta_interval_alpha,
    beta_intervals_ab,
    feedback_policy,
    induction_step_check,
    inequality_sweep,
    output_markov_pmf,
    recursive_input_ab,
    recursive_input_alpha,
)
from .directed_info import (
    concavity_probe,
    directed_information,
    directed_information_stepwise,
    mutual_information_given_state,
)
from .optimize import (
    KktReport,
    MatchReport,
    OptimizerConfig,
    kkt_check,
    maximize_di_feedback,
    maximize_mi_nofeedback,
    open_loop_match,
    upper_bound,
)
from .probability import (
    CausalKernel,
    SequencePmf,
    StepPolicy,
    ValidationReport,
    binary_entropy,
    chain_join,
    compose_causal,
    entropy,
    factorize_causal,
    index_sequence,
    kl_divergence,
    open_loop_kernel,
    random_policy,
    sequence_index,
    validate_causal,
)
from .tolerances import ToleranceConfig, tolerances

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
