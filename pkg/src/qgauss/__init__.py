"""qgauss: Gaussian random matrix models for q-deformed Gaussian variables.

Weighted sums of Kronecker-embedded GUE blocks whose mixed trace
moments converge to q-deformed Gaussian moments, together with the
exact combinatorial oracles (pair-partition sums, tensor contraction
identities, the limiting spectral density) used to verify them.
"""

__version__ = "0.1.0"

from .backend import BACKEND, has_compiled  # noqa: F401
from .partitions import (  # noqa: F401
    MomentSpec,
    PairPartition,
    crossing_histogram,
    crossing_number,
    enumerate_pair_partitions,
    iter_pair_partitions,
    q_gaussian_moment,
    wick_sum,
)
