"""Spin-network dynamics under spatially correlated environmental noise.

Two propagation engines share one model layer: an exact 2^N engine used
as ground truth for small networks, and an (N+1)-dimensional engine
restricted to the single-excitation sector that scales to long chains.
Closed-form results (stationary subspaces, relaxation blocking,
dephasing-rate limits) live in analytics; named numerical experiments
with CSV/JSON output live in experiments and are exposed through the
corrspin CLI.
"""

from .model import (
    CorrelationKernel,
    NetworkSpec,
    NoiseSpec,
    build_kernel,
    chain_coupling_profile,
)

__all__ = [
    "CorrelationKernel",
    "NetworkSpec",
    "NoiseSpec",
    "build_kernel",
    "chain_coupling_profile",
]

__version__ = "0.1.0"
