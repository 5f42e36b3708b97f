"""Linear-time Sinkhorn iterations for entropic W1 on uniform grids."""

from ._core import (
    FastSinkhornError,
    apply_1d,
    exact_w1_1d,
    random_pair_1d,
    ricker,
    ricker_pair,
    solve_1d,
    solve_2d,
    weighted_apply_1d,
)

__all__ = [
    "FastSinkhornError",
    "apply_1d",
    "exact_w1_1d",
    "random_pair_1d",
    "ricker",
    "ricker_pair",
    "solve_1d",
    "solve_2d",
    "weighted_apply_1d",
]
