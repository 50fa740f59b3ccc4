"""Size-bounded rule explanations for black-box binary classifiers.

Learn, from labeled samples of an opaque classifier, a small monotone
conjunction over the features of the instance being explained, minimizing the
empirical error; serve it as an if-then rule with measured precision.
"""

from .core import (
    ContractViolation,
    Explanation,
    Instance,
    LabeledSample,
    MonotoneMonomial,
    PartialInstance,
    Rule,
    SolveStats,
    covers,
    restrict,
    rule_from_explanation,
)
from .transform import (
    MonomialExample,
    empirical_loss_monomial,
    empirical_loss_rule,
    from_monomial_example,
    to_monomial_examples,
)
from .solver import (
    EnumerationCapError,
    SolveInstance,
    SolveReport,
    dump_instance,
    enumerate_exact,
    export_model_text,
    parse_instance_dump,
    solve,
    solve_cop,
    solve_greedy,
    solve_sat,
)
from .blackbox import (
    ConditioningInfeasibleError,
    Distribution,
    OracleHandle,
    build_oracle,
    constant_model,
    dictator_model,
    external_oracle,
    monomial_model,
    parity_model,
    random_tree_model,
    sample_conditioned,
    sample_oracle,
    train_builtin,
)
from .evaluate import (
    BenchmarkConfig,
    EvalReport,
    PacBudget,
    PrecisionEstimate,
    estimate_loss,
    estimate_precision,
    explain_instance,
    pac_sample_size,
    run_benchmark,
)
from .protocol import (
    ExternalOracleProcess,
    OracleUnavailableError,
    ProtocolError,
    run_conformance,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkConfig",
    "ConditioningInfeasibleError",
    "ContractViolation",
    "Distribution",
    "EnumerationCapError",
    "EvalReport",
    "Explanation",
    "ExternalOracleProcess",
    "Instance",
    "LabeledSample",
    "MonomialExample",
    "MonotoneMonomial",
    "OracleHandle",
    "OracleUnavailableError",
    "PacBudget",
    "PartialInstance",
    "PrecisionEstimate",
    "ProtocolError",
    "Rule",
    "SolveInstance",
    "SolveReport",
    "SolveStats",
    "build_oracle",
    "constant_model",
    "covers",
    "dictator_model",
    "dump_instance",
    "empirical_loss_monomial",
    "empirical_loss_rule",
    "enumerate_exact",
    "estimate_loss",
    "estimate_precision",
    "explain_instance",
    "export_model_text",
    "external_oracle",
    "from_monomial_example",
    "monomial_model",
    "pac_sample_size",
    "parity_model",
    "parse_instance_dump",
    "random_tree_model",
    "restrict",
    "rule_from_explanation",
    "run_benchmark",
    "run_conformance",
    "sample_conditioned",
    "sample_oracle",
    "solve",
    "solve_cop",
    "solve_greedy",
    "solve_sat",
    "to_monomial_examples",
    "train_builtin",
]
