"""Problem parameters for the critical fractional heat equation.

The equation is u_t = -(-Delta)^s u + u^p with the critical exponent
p = (n+2s)/(n-2s).  Everything downstream requires n > 4s; construction
rejects parameter pairs outside that range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np


def alpha_constant(n: int, s: float) -> float:
    """Normalization making U(y) = alpha*(1+|y|^2)^(-(n-2s)/2) solve (-Delta)^s U = U^p.

    Uses the identity
        (-Delta)^s (1+|y|^2)^(-(n-2s)/2)
            = 2^{2s} Gamma((n+2s)/2)/Gamma((n-2s)/2) * (1+|y|^2)^(-(n+2s)/2),
    so alpha^{p-1} must equal that constant.  Valid for any n >= 1,
    s in (0,1); n > 4s is not needed here.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0,1), got {s}")
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    d = 2.0 ** (2 * s) * gamma((n + 2 * s) / 2.0) / gamma((n - 2 * s) / 2.0)
    return d ** ((n - 2 * s) / (4 * s))


def frac_laplacian_constant(n: int, s: float) -> float:
    """Normalizing constant C(n,s) of the singular-integral fractional Laplacian.

    C(n,s) = 4^s Gamma(n/2+s) / (pi^{n/2} |Gamma(-s)|), the convention under
    which (-Delta)^s has Fourier symbol |xi|^{2s}.
    """
    # |Gamma(-s)| = Gamma(1-s)/s for s in (0,1)
    return 4.0 ** s * gamma(n / 2.0 + s) / (pi ** (n / 2.0) * gamma(1.0 - s) / s)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, fractional order and derived constants.

    Attributes:
        n: spatial dimension (integer >= 1).
        s: fractional order in (0,1), with n > 4s.
        p: critical exponent (n+2s)/(n-2s).
        alpha: bubble normalization constant.
        cns_op: normalizing constant C(n,s) of (-Delta)^s.
    """

    n: int
    s: float
    p: float = field(init=False)
    alpha: float = field(init=False)
    cns_op: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0,1), got {self.s}")
        if self.n <= 4 * self.s:
            raise ValueError(
                f"require n > 4s, got n={self.n}, 4s={4 * self.s}"
            )
        object.__setattr__(self, "p", (self.n + 2 * self.s) / (self.n - 2 * self.s))
        object.__setattr__(self, "alpha", alpha_constant(self.n, self.s))
        object.__setattr__(self, "cns_op", frac_laplacian_constant(self.n, self.s))

    @property
    def m(self) -> float:
        """Shorthand for n - 2s (the bubble decay exponent)."""
        return self.n - 2 * self.s


@dataclass(frozen=True)
class SpikePoint:
    """A concentration spike: scale mu > 0 and center xi in R^n."""

    mu: float
    xi: np.ndarray

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"spike scale mu must be positive, got {self.mu}")
        object.__setattr__(self, "xi", np.atleast_1d(np.asarray(self.xi, dtype=float)))


def make_spike(mu: float, xi) -> SpikePoint:
    return SpikePoint(mu=float(mu), xi=np.atleast_1d(np.asarray(xi, dtype=float)))
