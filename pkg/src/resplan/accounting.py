"""Privacy cost to zCDP / Gaussian-DP / (epsilon, delta)-DP conversions."""
from __future__ import annotations

import math
from dataclasses import dataclass

SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via ``erfc``; relative error near machine precision,
    including the far lower tail where ``1 + erf`` would cancel."""
    return 0.5 * math.erfc(-x / SQRT2)


def guarantees(pcost: float) -> tuple[float, float]:
    """Return ``(rho, mu)``: rho-zCDP with rho = pcost/2 and mu-GDP with mu = sqrt(pcost)."""
    if pcost < 0:
        raise ValueError(f"privacy cost must be non-negative, got {pcost}")
    return pcost / 2.0, math.sqrt(pcost)


def approx_dp_delta(pcost: float, epsilon: float) -> float:
    """Smallest delta such that the mechanism is (epsilon, delta)-DP."""
    if pcost < 0 or epsilon < 0:
        raise ValueError("privacy cost and epsilon must be non-negative")
    if pcost == 0:
        return 0.0
    mu = math.sqrt(pcost)
    a = normal_cdf(mu / 2 - epsilon / mu)
    b = normal_cdf(-mu / 2 - epsilon / mu)
    # e^eps * b can overflow for large epsilon while b underflows
    if b == 0.0:
        second = 0.0
    else:
        second = math.exp(epsilon + math.log(b))
    return min(1.0, max(0.0, a - second))


@dataclass(frozen=True)
class PrivacyAccount:
    pcost: float

    def __post_init__(self):
        if self.pcost < 0:
            raise ValueError("privacy cost must be non-negative")

    @property
    def rho(self) -> float:
        return self.pcost / 2.0

    @property
    def mu(self) -> float:
        return math.sqrt(self.pcost)

    def delta(self, epsilon: float) -> float:
        return approx_dp_delta(self.pcost, epsilon)


def calibrate_budget(*, rho: float | None = None, mu: float | None = None,
                     epsilon: float | None = None, delta: float | None = None,
                     rtol: float = 1e-12) -> float:
    """Privacy cost that exactly meets one target guarantee.

    Pass exactly one of ``rho``, ``mu`` or the pair ``(epsilon, delta)``.
    """
    given = [rho is not None, mu is not None, epsilon is not None or delta is not None]
    if sum(given) != 1:
        raise ValueError("specify exactly one of rho, mu or (epsilon, delta)")
    if rho is not None:
        if not rho > 0:
            raise ValueError("rho must be positive")
        return 2.0 * rho
    if mu is not None:
        if not mu > 0:
            raise ValueError("mu must be positive")
        return mu * mu
    if epsilon is None or delta is None:
        raise ValueError("epsilon and delta must be given together")
    if not epsilon >= 0 or not 0 < delta < 1:
        raise ValueError("need epsilon >= 0 and 0 < delta < 1")
    # delta is increasing in pcost; bracket then bisect in log space
    lo, hi = 1e-300, 1.0
    while approx_dp_delta(hi, epsilon) < delta:
        lo, hi = hi, hi * 4.0
        if hi > 1e300:
            raise ValueError(f"delta={delta} is unattainable at epsilon={epsilon}")
    while approx_dp_delta(lo, epsilon) >= delta and lo > 1e-300:
        lo /= 1e6
    for _ in range(400):
        mid = math.sqrt(lo * hi) if lo > 0 else hi / 2
        if approx_dp_delta(mid, epsilon) < delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return lo
