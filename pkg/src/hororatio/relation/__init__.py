"""Windows on equivalence relations: sums, ratios, maximal audits, skew products."""

from .audit import (
    LpRow,
    MaximalAudit,
    PropertyReport,
    PropertyRow,
    WeakRow,
    audit_maximal,
    check_properties,
    maximal_function,
)
from .automorphisms import (
    InnerAutomorphismSpec,
    PermutationAutomorphism,
    random_automorphism,
    u_phi,
)
from .finite_model import (
    FiniteModel,
    FiniteModelSequence,
    block_automorphism,
    interval_surrogate,
    oracle_conditional_expectation,
    random_hierarchical_model,
    skew_product_model,
)
from .sequences import (
    CapabilityError,
    CocycleAuditError,
    FunctionSequence,
    HoroballSequence,
    RatioDegeneracyError,
    RatioRecord,
    RatioSeries,
    SkewSequence,
    SubsetFunctionSeq,
    accumulate,
    ratio_series,
    skew_extend,
    weighted_sum,
)

