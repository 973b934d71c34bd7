"""Hard-label text attack with KL-LUCB pivot search."""

from ._core import (
    AttackConfig,
    BudgetExhausted,
    DatasetError,
    EmbeddingFormatError,
    EmbeddingStore,
    RuleVictim,
    Victim,
    VictimError,
    bernoulli_kl,
    dynamic_threshold,
    exploration_rate,
    find_pivot,
    kl_lower_bound,
    kl_upper_bound,
    perturbation_rate,
    run_attack,
    summarize,
)

__all__ = [
    "AttackConfig",
    "BudgetExhausted",
    "DatasetError",
    "EmbeddingFormatError",
    "EmbeddingStore",
    "RuleVictim",
    "Victim",
    "VictimError",
    "bernoulli_kl",
    "dynamic_threshold",
    "exploration_rate",
    "find_pivot",
    "kl_lower_bound",
    "kl_upper_bound",
    "perturbation_rate",
    "run_attack",
    "summarize",
]
