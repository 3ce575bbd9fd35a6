"""Fair division of indivisible items with exact, verifiable guarantees.

The package allocates indivisible items among agents so that fairness
(envy-freeness up to any item, envy-freeness up to one item, maximin-share
bounds) and efficiency (a guaranteed fraction of the maximum product of
utilities) hold simultaneously, and it ships independent exact checkers and
brute-force oracles so every claim can be re-verified from scratch. All
arithmetic is exact rational arithmetic; no floats are compared anywhere.
"""

from .core import (
    Allocation,
    AdditiveValuation,
    Bundle,
    CapacityError,
    Caps,
    ClassReport,
    DEFAULT_CAPS,
    EMPTY_BUNDLE,
    ExplicitValuation,
    Instance,
    IterationBoundError,
    MalformedInstanceError,
    caps_from_env,
    check_class,
    format_ratio,
    full_mask,
    iter_mask,
    mask_of,
    nash_product,
    parse_ratio,
)
from .verify import (
    GuaranteeReport,
    efx_violation,
    is_alpha_efx,
    is_alpha_gmms,
    is_alpha_mms,
    is_alpha_pmms,
    is_beta_mnw,
    is_ef1,
    is_gamma_separated,
    mms_share,
    within_golden_threshold,
)
from .oracle import (
    ImpossibilityCertificate,
    MnwResult,
    best_alpha_efx_product,
    certify_impossibility,
    exact_mnw,
)
from .instances import (
    GeneratorSpec,
    additive_gap_instance,
    budget_additive,
    example1,
    generate,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    monotone_gap_instance,
    random_additive,
    save_instance,
    xos,
)
from .additive_alg import (
    MatchOutcome,
    MatchState,
    MatchStep,
    RestartResult,
    improving_sequence,
    match_or_improve,
    matching_with_restarts,
    touching_sequence,
)
from .additive_alg import efx_matching as additive_efx_matching
from .subadditive_alg import (
    AvailableBundle,
    SubState,
    SubStep,
    available_bundles,
    chain_cycle_decomposition,
)
from .subadditive_alg import efx_matching as subadditive_efx_matching
from .completion import (
    EnvyCyclesResult,
    PipelineResult,
    SwapResult,
    envy_cycles,
    envy_edges,
    pipeline_additive,
    pipeline_subadditive,
    singleton_swaps,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveValuation",
    "Allocation",
    "AvailableBundle",
    "Bundle",
    "CapacityError",
    "Caps",
    "ClassReport",
    "DEFAULT_CAPS",
    "EMPTY_BUNDLE",
    "EnvyCyclesResult",
    "ExplicitValuation",
    "GeneratorSpec",
    "GuaranteeReport",
    "ImpossibilityCertificate",
    "Instance",
    "IterationBoundError",
    "MalformedInstanceError",
    "MatchOutcome",
    "MatchState",
    "MatchStep",
    "MnwResult",
    "PipelineResult",
    "RestartResult",
    "SubState",
    "SubStep",
    "SwapResult",
    "additive_efx_matching",
    "additive_gap_instance",
    "available_bundles",
    "best_alpha_efx_product",
    "budget_additive",
    "caps_from_env",
    "certify_impossibility",
    "chain_cycle_decomposition",
    "check_class",
    "efx_violation",
    "envy_cycles",
    "envy_edges",
    "exact_mnw",
    "example1",
    "format_ratio",
    "full_mask",
    "generate",
    "improving_sequence",
    "instance_from_dict",
    "instance_to_dict",
    "is_alpha_efx",
    "is_alpha_gmms",
    "is_alpha_mms",
    "is_alpha_pmms",
    "is_beta_mnw",
    "is_ef1",
    "is_gamma_separated",
    "iter_mask",
    "load_instance",
    "mask_of",
    "match_or_improve",
    "matching_with_restarts",
    "mms_share",
    "monotone_gap_instance",
    "nash_product",
    "parse_ratio",
    "pipeline_additive",
    "pipeline_subadditive",
    "random_additive",
    "save_instance",
    "singleton_swaps",
    "subadditive_efx_matching",
    "touching_sequence",
    "within_golden_threshold",
    "xos",
]
