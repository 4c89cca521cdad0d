"""Pufferfish privacy for Markov-chain time series.

Releases Lipschitz queries over a trajectory with Laplace noise whose
scale comes from searching Markov quilts: node sets whose conditioning
bounds how far one protected node can push the rest of the chain. Also
ships a composition accountant for combining audited releases and a
brute-force oracle that verifies guarantees exactly on small instances.
"""

from .chains import (
    ChainModel,
    SpectralInfo,
    StateSequence,
    backward_conditional,
    forward_conditional,
    marginal,
    random_model,
    sample,
    spectral,
    transition_power,
    validate,
)
from .composition import (
    Check,
    CompositionReport,
    CompositionRule,
    compose_auto,
    compose_parallel_general,
    compose_parallel_mqm_approx,
    compose_sequential_general,
    compose_sequential_legacy,
    compose_sequential_mqm,
)
from .errors import MquiltError
from .fit import FitConfig, fit_chain
from .influence import (
    InfluenceValue,
    QuiltShape,
    Variant,
    approx_max_influence,
    approx_offset_threshold,
    exact_max_influence,
    influence_over_set,
    nearby_size,
)
from .mechanism import (
    ActiveQuilt,
    Framework,
    LipschitzQuery,
    ReleaseRecord,
    Window,
    count_state_query,
    enumerate_quilts,
    quilt_scores,
    release,
    score,
    unit_laplace,
)
from .oracle import (
    CounterexampleReport,
    EmpiricalEpsilon,
    MixtureDensity,
    OutputDensity,
    RemoteBoundReport,
    Witness,
    check_joint_remote_bound,
    conditional_density,
    empirical_epsilon,
    enumerate_sequences,
    enumerated_max_influence,
    estimate_max_divergence,
    joint_conditional_mixture,
    max_divergence_over_secrets,
    product_of_marginals,
    reevaluate_witness,
    release_values,
    sequence_probs,
    verify_counterexample,
)
from .storage import (
    LedgerEntry,
    append_release,
    framework_from_dict,
    framework_to_dict,
    load_model,
    load_sequence,
    read_ledger,
    save_model,
    save_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "ChainModel",
    "StateSequence",
    "SpectralInfo",
    "validate",
    "marginal",
    "transition_power",
    "forward_conditional",
    "backward_conditional",
    "spectral",
    "sample",
    "random_model",
    "Variant",
    "QuiltShape",
    "InfluenceValue",
    "nearby_size",
    "exact_max_influence",
    "approx_max_influence",
    "approx_offset_threshold",
    "influence_over_set",
    "Window",
    "Framework",
    "LipschitzQuery",
    "count_state_query",
    "ActiveQuilt",
    "ReleaseRecord",
    "enumerate_quilts",
    "score",
    "quilt_scores",
    "release",
    "unit_laplace",
    "CompositionRule",
    "Check",
    "CompositionReport",
    "compose_sequential_mqm",
    "compose_sequential_legacy",
    "compose_sequential_general",
    "compose_parallel_general",
    "compose_parallel_mqm_approx",
    "compose_auto",
    "OutputDensity",
    "MixtureDensity",
    "EmpiricalEpsilon",
    "Witness",
    "RemoteBoundReport",
    "CounterexampleReport",
    "enumerate_sequences",
    "sequence_probs",
    "conditional_density",
    "joint_conditional_mixture",
    "product_of_marginals",
    "estimate_max_divergence",
    "max_divergence_over_secrets",
    "empirical_epsilon",
    "reevaluate_witness",
    "release_values",
    "enumerated_max_influence",
    "check_joint_remote_bound",
    "verify_counterexample",
    "FitConfig",
    "fit_chain",
    "save_model",
    "load_model",
    "save_sequence",
    "load_sequence",
    "framework_to_dict",
    "framework_from_dict",
    "LedgerEntry",
    "append_release",
    "read_ledger",
    "MquiltError",
    "__version__",
]
