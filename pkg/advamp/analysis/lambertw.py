"""
Real Lambert W function on the principal (0) and lower (−1) branches.

Initial guesses follow the usual series at the branch point −1/e and the
asymptotic ``log x − log log x`` expansion away from it; both are refined
with Halley's method.
"""

import logging
import math

logger = logging.getLogger(__name__)

BRANCH_POINT = -math.exp(-1.0)
MAX_ITERATIONS = 100


class LambertWDomainError(ValueError):
    """Raised when the argument lies outside the requested real branch."""


def _initial_guess(x: float, branch: int) -> float:
    if x < -0.25 or (branch == 0 and x < 0):
        # series in p = sqrt(2(e·x + 1)) around the branch point
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        if branch == -1:
            p = -p
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if branch == -1:
        lx = math.log(-x)
        return lx - math.log(-lx)
    if x < 3.0:
        return math.log1p(x) * 0.9
    lx = math.log(x)
    return lx - math.log(lx)


def lambert_w(x: float, branch: int = 0) -> float:
    """
    Solve ``w·e^w = x`` for real ``w``.

    Args:
        x: Argument; at least −1/e, and negative for the lower branch
        branch: 0 for the principal branch (w ≥ −1), −1 for the lower
            branch (w ≤ −1)

    Returns:
        The branch value, with ``|w·e^w − x| ≤ 1e-12·max(1, |x|)``

    Raises:
        LambertWDomainError: If ``x`` is outside the branch's domain
    """
    if branch not in (0, -1):
        raise ValueError(f"unsupported branch {branch}")
    if math.isnan(x):
        raise LambertWDomainError("Lambert W is undefined for NaN")
    if x < BRANCH_POINT:
        if BRANCH_POINT - x > 1e-15:
            raise LambertWDomainError(
                f"Lambert W argument {x!r} is below the branch point -1/e"
            )
        x = BRANCH_POINT
    if branch == -1 and x >= 0.0:
        raise LambertWDomainError(
            f"lower-branch Lambert W needs a negative argument, got {x!r}"
        )
    if x == BRANCH_POINT:
        return -1.0
    if x == 0.0:
        return 0.0

    w = _initial_guess(x, branch)
    for _ in range(MAX_ITERATIONS):
        ew = math.exp(w)
        f = w * ew - x
        w1 = w + 1.0
        if w1 == 0.0:
            break
        denominator = ew * w1 - (w + 2.0) * f / (2.0 * w1)
        if denominator == 0.0:
            break
        dw = f / denominator
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    else:
        logger.warning(f"Halley iteration for W_{branch}({x}) hit the iteration cap")
    return w


def residual(w: float, x: float) -> float:
    """Absolute residual ``|w·e^w − x|``."""
    return abs(w * math.exp(w) - x)
