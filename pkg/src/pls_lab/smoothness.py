"""Local-smoothness prediction from consecutive gradients.

The estimator keeps the previous iterate and gradient of its parameter
group and predicts the local Lipschitz constant as

    L = ||g_t - g_{t-1}|| / (||x_t - x_{t-1}|| + eps1)

The step size is then eta0 / (L + eps2), optionally damped by 1/sqrt(t).
eps1 guards the vanishing-displacement denominator, eps2 caps the rate at
eta0/eps2 when the predicted smoothness collapses to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .linalg import l2_norm

DECAY_MODES = ("constant", "sqrt_t")


def adaptive_rate(
    l_hat: float,
    eta0: float,
    eps2: float,
    decay: str = "constant",
    t: int = 1,
) -> float:
    """Step size for a predicted smoothness value; at most eta0/eps2."""
    if l_hat < 0.0:
        raise ValueError("predicted smoothness must be non-negative")
    if eps2 <= 0.0:
        raise ValueError("eps2 must be positive")
    if decay not in DECAY_MODES:
        raise ValueError(f"decay must be one of {DECAY_MODES}")
    eta = eta0 / (l_hat + eps2)
    if decay == "sqrt_t":
        eta /= math.sqrt(t)
    return eta


def base_rate_admissible(eta0: float, rho: float) -> bool:
    """Whether a base rate sits in the window [1 - rho, 1] (inclusive).

    For step sizes of the form eta0 / L, base rates in this window keep
    the averaged descent update contracting at rate rho.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    return 1.0 - rho <= eta0 <= 1.0


@dataclass
class SmoothnessReading:
    """One prediction: smoothness estimate and the step size derived from it."""

    l_hat: float
    eta: float
    group_id: int
    t: int


class SmoothnessEstimator:
    """Single-owner per-group state producing one reading per update.

    The first call has no history to difference, so it records the state
    and returns a bootstrap reading with l_hat = 0 and eta = eta0 (not
    eta0/eps2, which could be orders of magnitude larger before any
    smoothness information exists).
    """

    def __init__(
        self,
        eps1: float,
        eps2: float,
        eta0: float,
        decay: str = "constant",
        group_id: int = 0,
    ):
        if eps1 <= 0.0 or eps2 <= 0.0:
            raise ValueError("eps1 and eps2 must be positive")
        if decay not in DECAY_MODES:
            raise ValueError(f"decay must be one of {DECAY_MODES}")
        self.eps1 = float(eps1)
        self.eps2 = float(eps2)
        self.eta0 = float(eta0)
        self.decay = decay
        self.group_id = group_id
        self.t = 0
        self.prev_x: np.ndarray | None = None
        self.prev_g: np.ndarray | None = None

    def predict(self, x: np.ndarray, g: np.ndarray) -> SmoothnessReading:
        """Predict smoothness at (x, g); stores them for the next call."""
        if x.shape != g.shape:
            raise ValueError("iterate and gradient must have the same shape")
        if self.prev_x is not None and x.shape != self.prev_x.shape:
            raise ValueError("dimension changed between updates")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient in smoothness update")
        self.t += 1
        if self.prev_x is None:
            self.prev_x = x.copy()
            self.prev_g = g.copy()
            return SmoothnessReading(0.0, self.eta0, self.group_id, self.t)
        g_diff = l2_norm(g - self.prev_g)
        x_diff = l2_norm(x - self.prev_x)
        l_hat = g_diff / (x_diff + self.eps1)
        self.prev_x = x.copy()
        self.prev_g = g.copy()
        eta = adaptive_rate(l_hat, self.eta0, self.eps2, self.decay, self.t)
        return SmoothnessReading(l_hat, eta, self.group_id, self.t)
