"""Exact oracle solvers over full calendar information."""
from .solver import (
    JointAssignment,
    OracleStats,
    ProblemLike,
    compute_oracle_stats,
    count_feasible_assignments,
    evaluate_assignment,
    greedy_cost,
    min_cost_schedule,
    worst_cost_schedule,
)

__all__ = [
    "JointAssignment", "OracleStats", "ProblemLike", "compute_oracle_stats",
    "count_feasible_assignments", "evaluate_assignment", "greedy_cost",
    "min_cost_schedule", "worst_cost_schedule",
]
