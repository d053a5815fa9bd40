"""Hoeffding radii and sample-size formulas. All logarithms are natural."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PTAS_C0 = 9.8217
DEFAULT_MW_CONSTANT = 8.0
DEFAULT_AUDIT_CONSTANT = 2.0


@dataclass(frozen=True)
class ConfidenceParams:
    epsilon: float
    delta: float
    eta: float = 1.0

    def __post_init__(self):
        _unit("epsilon", self.epsilon)
        _unit("delta", self.delta)
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


def _unit(name, x):
    if not 0 < x < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {x}")


def _accuracy(x):
    if not 0 < x <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {x}")


def _positive(name, x):
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x}")


def _log_arg(x):
    if not x > 1:
        raise ValueError(f"logarithm argument must exceed 1, got {x}")
    return math.log(x)


def elim_radius(r: int, pool: int, delta: float) -> float:
    """Anytime radius ``sqrt(ln(4 * pool * r**2 / delta) / (2r))`` for elimination."""
    if r < 1 or pool < 1:
        raise ValueError("r and pool must be at least 1")
    _positive("delta", delta)
    return math.sqrt(_log_arg(4.0 * pool * r * r / delta) / (2.0 * r))


def elim_radii(r: np.ndarray, pool: int, delta: float) -> np.ndarray:
    """Vectorized :func:`elim_radius` over an array of round indices."""
    r = np.asarray(r, dtype=float)
    return np.sqrt(np.log(4.0 * pool * r * r / delta) / (2.0 * r))


def audit_radius(n: int, rivals: int, delta: float) -> float:
    """Anytime audit radius; the same formula with the rival count as pool."""
    return elim_radius(n, rivals, delta)


def elim_round_cap(pool: int, eta: float, delta: float) -> int:
    """First round r at which the elimination radius falls to ``eta / 4``.

    The radius is eventually decreasing in r, so a doubling search followed by
    bisection over the decreasing region finds the threshold.
    """
    _positive("eta", eta)
    _positive("delta", delta)
    target = eta / 4.0
    # the radius increases only while ln(4 pool r^2 / delta) < 2, i.e. r < r_peak
    r_peak = max(1, math.ceil(math.sqrt(delta * math.e**2 / (4.0 * pool))))
    lo = r_peak
    if elim_radius(lo, pool, delta) <= target:
        # the log argument may be <= 1 before the peak; scan the short prefix
        for r in range(1, lo + 1):
            if 4.0 * pool * r * r / delta > 1 and elim_radius(r, pool, delta) <= target:
                return r
        return lo
    hi = lo * 2
    while elim_radius(hi, pool, delta) > target:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if elim_radius(mid, pool, delta) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def _check_mk(m, k, need_rival=False):
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got k={k}, m={m}")
    if need_rival and k >= m:
        raise ValueError(f"need k < m so that a rival exists, got k={k}, m={m}")


def _log_comb(m, k):
    return math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1)


def erm_binary_T(m: int, k: int, epsilon: float, delta: float) -> int:
    """Tasks needed so that exhaustive ERM over size-k committees is epsilon-optimal."""
    _check_mk(m, k)
    _accuracy(epsilon)
    _unit("delta", delta)
    return math.ceil(2.0 / epsilon**2 * (_log_comb(m, k) + math.log(2.0 / delta)) - 1e-9)


def greedy_binary_T(m: int, k: int, epsilon: float, delta: float) -> int:
    _check_mk(m, k)
    _accuracy(epsilon)
    _unit("delta", delta)
    c = (2.0 - 1.0 / math.e) ** 2 / (2.0 * epsilon**2)
    return math.ceil(c * (_log_comb(m, k) + math.log(2.0 / delta)) - 1e-9)


def ordinal_erm_T(m: int, k: int, epsilon: float, delta: float) -> int:
    _check_mk(m, k, need_rival=True)
    _accuracy(epsilon)
    _unit("delta", delta)
    log_arg = math.log(2.0 * (m - k) / delta) + _log_comb(m, k)
    return math.ceil(2.0 / epsilon**2 * log_arg - 1e-9)


def certify_params(k: int, epsilon: float, delta: float) -> tuple[int, int]:
    """Failure quota ``r0`` and draw cap ``M0`` for miss-rate certification."""
    if k < 1:
        raise ValueError("k must be at least 1")
    _positive("epsilon", epsilon)
    _positive("delta", delta)
    r0 = math.ceil(6.0 * _log_arg(4.0 * k / delta) - 1e-9)
    M0 = math.floor(2.0 * r0 * k / epsilon + 1e-9)
    return r0, M0


def wofg_L(k: int, epsilon: float, delta: float) -> int:
    """Number of tentative (ranking, rival) pairs used to estimate the miss rate."""
    if k < 1:
        raise ValueError("k must be at least 1")
    _positive("epsilon", epsilon)
    _positive("delta", delta)
    return math.ceil(128.0 * k * k / epsilon**2 * _log_arg(4.0 * k / delta) - 1e-9)


def hoeffding_slack(L: int, k: int, delta: float) -> float:
    """One-sided Hoeffding slack ``sqrt(ln(4k/delta) / (2L))`` for an L-sample mean."""
    return math.sqrt(_log_arg(4.0 * k / delta) / (2.0 * L))


def mw_rounds_and_rate(m: float, epsilon: float, c_R: float = DEFAULT_MW_CONSTANT) -> tuple[int, float]:
    """Rounds ``R = ceil(c_R ln m / eps^2)`` and learning rate ``sqrt(ln m / R)``."""
    if m < 2:
        raise ValueError("need at least two candidates")
    _positive("epsilon", epsilon)
    _positive("c_R", c_R)
    R = math.ceil(c_R * math.log(m) / epsilon**2 - 1e-9)
    R = max(R, 1)
    return R, mw_rate(m, R)


def mw_rate(m: float, R: int) -> float:
    return math.sqrt(math.log(m) / R)


def audit_T(m: int, size: int, epsilon: float, delta: float) -> int:
    """Rankings for a fixed-committee audit against ``m - size`` rivals."""
    if not 1 <= size < m:
        raise ValueError("committee must be nonempty and proper")
    _accuracy(epsilon)
    _unit("delta", delta)
    return max(1, math.ceil(math.log(2.0 * (m - size) / delta) / (2.0 * epsilon**2) - 1e-9))


def family_erm_T(n_family: int, epsilon: float, delta: float) -> int:
    if n_family < 1:
        raise ValueError("family must be nonempty")
    _accuracy(epsilon)
    _unit("delta", delta)
    return math.ceil(2.0 / epsilon**2 * math.log(2.0 * n_family / delta) - 1e-9)


def minimax_audit_T(m: int, R: int, epsilon: float, delta: float, const: float = DEFAULT_AUDIT_CONSTANT) -> int:
    _accuracy(epsilon)
    _unit("delta", delta)
    return max(1, math.ceil(const / epsilon**2 * math.log(m * R / delta) - 1e-9))


def ptas_size(gamma: float, c0: float = PTAS_C0) -> int:
    _unit("gamma", gamma)
    return math.ceil(c0 / gamma - 1e-9)


def ranking_sort_cost(m: int) -> int:
    """Information-theoretic comparison cost ``ceil(log2 m!)``, computed exactly."""
    return (math.factorial(m) - 1).bit_length() if m > 1 else 0
