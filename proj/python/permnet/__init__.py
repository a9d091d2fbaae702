"""Permutation-invariant agent networks for multi-agent value decomposition."""

from ._core import (
    AgentNetwork,
    BattleEnv,
    ContractViolation,
    DimensionError,
    DpnNet,
    NumericError,
    QmixMixer,
    architectures,
    assign_rows,
    epsilon,
    evaluate_greedy,
    gumbel_softmax,
    hpn_parameter_count,
    is_permutation_matrix,
    percentile,
    sinkhorn_normalize,
    td_lambda_targets,
    train,
    vdn_mix,
)

__all__ = [
    "AgentNetwork",
    "BattleEnv",
    "ContractViolation",
    "DimensionError",
    "DpnNet",
    "NumericError",
    "QmixMixer",
    "architectures",
    "assign_rows",
    "epsilon",
    "evaluate_greedy",
    "gumbel_softmax",
    "hpn_parameter_count",
    "is_permutation_matrix",
    "percentile",
    "sinkhorn_normalize",
    "td_lambda_targets",
    "train",
    "vdn_mix",
]
