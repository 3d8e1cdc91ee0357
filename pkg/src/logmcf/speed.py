"""Scalar speed function H * ln(H + h0)^alpha and its derived quantities.

Everything downstream (flow driver, evolution identities, blowup
analysis) consumes the speed only through this module.  All functions
are pure, vectorized over numpy arrays, and guarded against negative
mean curvature input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

E = math.e


@dataclass(frozen=True)
class SpeedParams:
    """Parameters (alpha, h0) of the speed H * ln(H + h0)^alpha.

    alpha > 0 is the regime of interest; alpha = 0 is accepted as an
    explicit degenerate mode giving exactly the mean curvature flow,
    useful as a closed-form reference.  h0 >= e guarantees
    ln(H + h0) >= 1 for every H >= 0, which is what makes the speed
    monotone and convex.
    """

    alpha: float
    h0: float = E

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.h0 < E * (1.0 - 1e-12):
            raise ValueError(f"h0 must be >= e = {E}, got {self.h0}")

    @property
    def is_mcf_reference(self) -> bool:
        """True in the degenerate alpha = 0 (mean curvature flow) mode."""
        return self.alpha == 0.0

    def _shift_log(self, h):
        h = np.asarray(h, dtype=float)
        if np.any(h < 0.0):
            raise ValueError("mean curvature must be nonnegative")
        hhat = h + self.h0
        return h, hhat, np.log(hhat)

    def value(self, h):
        """Speed f = H * ln(H + h0)^alpha.  Zero iff H = 0."""
        h, _, lg = self._shift_log(h)
        return h * lg**self.alpha

    def deriv(self, h):
        """f' = ln(Hhat)^(alpha-1) * [ln(Hhat) + alpha*H/Hhat], > 0 for H >= 0."""
        h, hhat, lg = self._shift_log(h)
        return lg ** (self.alpha - 1.0) * (lg + self.alpha * h / hhat)

    def deriv2(self, h):
        """f'' in closed form; > 0 for H >= 0 when alpha > 0, zero at alpha = 0."""
        a = self.alpha
        h, hhat, lg = self._shift_log(h)
        return (a / hhat) * lg ** (a - 2.0) * (lg + self.h0 * lg / hhat + (a - 1.0) * h / hhat)

    def h_deriv_minus_value(self, h):
        """H*f' - f = alpha * H^2 / Hhat * ln(Hhat)^(alpha-1), >= 0 with equality iff H = 0.

        This is the reaction coefficient that makes the pinching ratio
        monotone; evaluated from its own closed form rather than as a
        difference, so it is exact at H = 0.
        """
        a = self.alpha
        h, hhat, lg = self._shift_log(h)
        return a * h * h / hhat * lg ** (a - 1.0)

    def h_deriv2_over_deriv(self, h):
        """H*f''/f', bounded in [0, 2*alpha] for all H >= 0 when h0 >= e."""
        a = self.alpha
        h, hhat, lg = self._shift_log(h)
        hl = hhat * lg
        return (a * h / hl) * (hl + self.h0 * lg + (a - 1.0) * h) / (hl + a * h)
