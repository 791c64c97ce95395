"""fracspike: numerical laboratory for multi-spike infinite-time concentration
in the critical fractional heat equation u_t = -(-Delta)^s u + u^{(n+2s)/(n-2s)}."""

from .params import ProblemParams, SpikePoint, alpha_constant

__all__ = ["ProblemParams", "SpikePoint", "alpha_constant"]
__version__ = "0.1.0"
