from lorasb.oracles.suite import (
    OracleResult, best_rank_r_oracle, fd_gradient_oracle, fd_r_gradient_oracle, lstsq_oracle,
    naive_matmul, singular_values_oracle, vector_relative_error
)

__all__ = [
    "OracleResult",
    "best_rank_r_oracle",
    "fd_gradient_oracle",
    "fd_r_gradient_oracle",
    "lstsq_oracle",
    "naive_matmul",
    "singular_values_oracle",
    "vector_relative_error"
]
