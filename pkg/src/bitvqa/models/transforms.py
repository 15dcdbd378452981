"""Conversions between the 0-100 quality scale and the 1-5 MOS scale.

The forward map is the standard cubic

    MOS = 1 + 0.035*R + R*(R - 60)*(100 - R)*7e-6,   R in [0, 100]

and the inverse is a monotone bisection. The cubic dips slightly below 1 on
R in (0, ~6.5154), so the pair is strictly increasing and mutually inverse
on MOS in [1, 4.5] <-> R in [6.5154, 100]; ``r_from_mos(1)`` returns the
upper crossing (~6.5154), not 0.
"""

from __future__ import annotations

import math

from ..errors import PredictionDomainError

R_MIN = 0.0
R_MAX = 100.0
MOS_MIN = 1.0
MOS_MAX = 4.5
_BISECTION_STEPS = 18  # brackets the root to ~4e-4 before Newton polishing
_NEWTON_STEPS = 5      # quadratic convergence: well below 1e-9 afterwards


def mos_from_r(r: float) -> float:
    """Map a 0-100 quality value to the 1-5 MOS scale (input clamped)."""
    if not math.isfinite(r):
        raise PredictionDomainError(f"quality value must be finite, got {r!r}")
    r = min(max(r, R_MIN), R_MAX)
    return 1.0 + 0.035 * r + r * (r - 60.0) * (100.0 - r) * 7e-6


def _cubic(r: float) -> float:
    return 1.0 + 0.035 * r + r * (r - 60.0) * (100.0 - r) * 7e-6


def _cubic_slope(r: float) -> float:
    return 0.035 + 7e-6 * (-3.0 * r * r + 320.0 * r - 6000.0)


def r_from_mos(mos: float) -> float:
    """Map a MOS in [1, 4.5] back to the 0-100 scale (input clamped).

    Bisection keeps the upper bracket wherever the cubic meets the target
    (selecting the strictly increasing branch), then Newton steps polish the
    root inside that bracket to below 1e-9.
    """
    if not math.isfinite(mos):
        raise PredictionDomainError(f"MOS must be finite, got {mos!r}")
    mos = min(max(mos, MOS_MIN), MOS_MAX)
    lo, hi = R_MIN, R_MAX
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _cubic(mid) < mos:
            lo = mid
        else:
            hi = mid
    root = hi
    for _ in range(_NEWTON_STEPS):
        slope = _cubic_slope(root)
        if slope <= 0.0:
            break
        candidate = root - (_cubic(root) - mos) / slope
        if not lo <= candidate <= hi:
            candidate = 0.5 * (lo + hi)
        if _cubic(candidate) < mos:
            lo = candidate
        else:
            hi = candidate
        root = candidate
    return min(max(root, R_MIN), R_MAX)
