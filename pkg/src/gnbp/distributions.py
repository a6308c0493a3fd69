"""Count distributions and generative samplers of the generalized
negative binomial process (gNBP).

A cluster structure under this model has a Poisson distributed number of
clusters whose sizes are iid truncated negative binomial; the total count
then follows the generalized negative binomial distribution.  For a
strictly negative discount the same structure can alternatively be grown
from a finite-atom completely random measure thinned by Poisson counts,
which this module exposes as an independent sampling route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core_math import LogStirlingTable, log_gamma_ratio, log_sum_exp

# Discounts within this tolerance of zero are routed through the analytic
# a -> 0 limits; the raw formulas contain 1/a and Gamma(-a) factors that
# blow up numerically although the model itself is regular at a = 0.
ZERO_DISCOUNT_TOL = 1e-8


@dataclass(frozen=True)
class Params:
    """Model triple: mass gamma0 > 0, discount a < 1, probability p in (0, 1).

    The generalized gamma scale is derived, c = (1 - p) / p.
    """

    gamma0: float
    a: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "gamma0", float(self.gamma0))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "p", float(self.p))
        if not self.gamma0 > 0.0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not self.a < 1.0:
            raise ValueError(f"discount must satisfy a < 1, got {self.a}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")


@dataclass(frozen=True)
class ClusterSizes:
    """Sizes (n_1, ..., n_l) of a cluster structure; n = sum, l = count."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if any(s < 1 for s in sizes):
            raise ValueError("cluster sizes must be positive integers")

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def l(self) -> int:
        return len(self.sizes)

    def size_multiplicities(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique sizes and their multiplicities, ascending."""
        if not self.sizes:
            return np.array([], dtype=int), np.array([], dtype=int)
        return np.unique(np.asarray(self.sizes, dtype=int), return_counts=True)


def kappa_ap(a, p):
    """(1 - (1 - p)^a) / (a p^a), vectorized over a and/or p.

    Within ZERO_DISCOUNT_TOL of a = 0 the analytic limit -log(1 - p) is
    substituted.  For very negative discounts the naive form overflows,
    so the a < 0 branch is rearranged as
    ((1 - p) / p)^a (1 - e^{-a log(1 - p)}) / (-a).
    """
    a_arr, p_arr = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(p, dtype=float)
    )
    u = a_arr * np.log1p(-p_arr)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        neg = (
            np.exp(a_arr * (np.log1p(-p_arr) - np.log(p_arr)))
            * (-np.expm1(-u))
            / (-a_arr)
        )
        nonneg = -np.expm1(u) * np.exp(-a_arr * np.log(p_arr)) / a_arr
        limit = -np.log1p(-p_arr)
    out = np.where(
        np.abs(a_arr) < ZERO_DISCOUNT_TOL, limit, np.where(a_arr < 0.0, neg, nonneg)
    )
    if out.ndim == 0:
        return float(out)
    return out


def _kappa_scalar(a: float, p: float) -> float:
    # pure-math twin of kappa_ap; the samplers call this per draw and the
    # numpy broadcasting overhead dominates at that granularity
    if abs(a) < ZERO_DISCOUNT_TOL:
        return -math.log1p(-p)
    try:
        if a < 0.0:
            u = a * math.log1p(-p)
            return (
                math.exp(a * (math.log1p(-p) - math.log(p)))
                * (-math.expm1(-u))
                / (-a)
            )
        return -math.expm1(a * math.log1p(-p)) * math.exp(-a * math.log(p)) / a
    except OverflowError:
        return math.inf


def kappa(params: Params) -> float:
    """Per-unit-mass rate of occupied clusters: l ~ Poisson(gamma0 * kappa)."""
    return _kappa_scalar(params.a, params.p)


def log_weighted_stirling_sum(n: int, params: Params, stirling: LogStirlingTable) -> float:
    """log sum_{l=0}^{n} gamma0^l p^{-a l} S_a(n, l).

    This is both the inner sum of the generalized negative binomial PMF
    and the normalizing constant of the conditional cluster-count law.
    """
    if stirling.a != params.a:
        raise ValueError(
            f"Stirling table discount {stirling.a} does not match params.a {params.a}"
        )
    if n == 0:
        return 0.0
    row = stirling.row(n)
    l = np.arange(n + 1, dtype=float)
    w = l * (math.log(params.gamma0) - params.a * math.log(params.p)) + row
    return log_sum_exp(w)


def gnb_log_pmf(n: int, params: Params, stirling: LogStirlingTable) -> float:
    """Log PMF of the generalized negative binomial distribution at n >= 0:

        p_N(n) = (p^n / n!) e^{-gamma0 kappa} sum_l gamma0^l p^{-a l} S_a(n, l)
    """
    if n < 0:
        raise ValueError(f"count must be nonnegative, got {n}")
    return (
        n * math.log(params.p)
        - float(gammaln(n + 1))
        - params.gamma0 * kappa(params)
        + log_weighted_stirling_sum(n, params, stirling)
    )


def gnb_mean(params: Params) -> float:
    """Mean of the generalized negative binomial: gamma0 (p/(1-p))^(1-a)."""
    return params.gamma0 * (params.p / (1.0 - params.p)) ** (1.0 - params.a)


def tnb_log_pmf(u: int, a: float, p: float) -> float:
    """Log PMF of the truncated negative binomial cluster-size law, u >= 1.

    Rearranged as Gamma(u - a) / (u! Gamma(1 - a)) * p^{u - a} / kappa(a, p),
    which cancels the simultaneous sign flips of Gamma(-a) and the raw
    normalizer at a = 0 analytically.  Within ZERO_DISCOUNT_TOL of a = 0
    this reduces to the logarithmic distribution p^u / (-u log(1 - p)).
    """
    if u < 1:
        raise ValueError(f"cluster size must be >= 1, got {u}")
    if a >= 1.0:
        raise ValueError(f"discount must satisfy a < 1, got {a}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if abs(a) < ZERO_DISCOUNT_TOL:
        return u * math.log(p) - math.log(u) - math.log(-math.log1p(-p))
    return (
        log_gamma_ratio(u, a)
        - float(gammaln(u + 1))
        + (u - a) * math.log(p)
        - math.log(_kappa_scalar(a, p))
    )


def _tnb_log_p1(a: float, p: float) -> float:
    # tnb_log_pmf(1, a, p) with the u = 1 simplifications applied; the
    # sampler calls this once per draw
    if abs(a) < ZERO_DISCOUNT_TOL:
        return math.log(p) - math.log(-math.log1p(-p))
    return (1.0 - a) * math.log(p) - math.log(_kappa_scalar(a, p))


def tnb_sample(a: float, p: float, rng: np.random.Generator) -> int:
    """Exact truncated negative binomial draw by an inverse-CDF walk.

    Successive PMF values follow the ratio recursion
    p(u + 1) / p(u) = p (u - a) / (u + 1), so the walk needs one
    multiply-add per support point and no envelope tuning.
    """
    if a >= 1.0:
        raise ValueError(f"discount must satisfy a < 1, got {a}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    u = 1
    pmf = math.exp(_tnb_log_p1(a, p))
    target = rng.random()
    acc = pmf
    while target > acc:
        pmf *= p * (u - a) / (u + 1.0)
        u += 1
        acc += pmf
        if pmf <= 0.0:
            break
    return u


def sample_cluster_structure(params: Params, rng: np.random.Generator) -> ClusterSizes:
    """Compound-Poisson draw of a cluster structure.

    l ~ Poisson(gamma0 * kappa), then l iid truncated negative binomial
    sizes; the total n is marginally generalized negative binomial.
    """
    l = int(rng.poisson(params.gamma0 * kappa(params)))
    sizes = tuple(tnb_sample(params.a, params.p, rng) for _ in range(l))
    return ClusterSizes(sizes)


def sample_crm_counts(params: Params, rng: np.random.Generator) -> ClusterSizes:
    """Finite-atom random-measure route to the same cluster structure,
    valid only for strictly negative discounts.

    Draws K ~ Poisson(-gamma0 c^a / a) atoms with c = (1 - p) / p, gamma
    weights r_k ~ Gamma(-a, 1/c), Poisson counts n_k ~ Poisson(r_k), and
    discards the zero counts.  Distributed identically to
    :func:`sample_cluster_structure`, which makes the two samplers
    independent oracles for each other.
    """
    a = params.a
    if a >= 0.0:
        raise ValueError(
            f"finite-atom sampler requires a < 0 (atom count is a.s. infinite "
            f"for 0 <= a < 1), got a={a}"
        )
    c = (1.0 - params.p) / params.p
    nu_total = -params.gamma0 * c**a / a
    k = int(rng.poisson(nu_total))
    if k == 0:
        return ClusterSizes(())
    weights = rng.gamma(shape=-a, scale=1.0 / c, size=k)
    counts = rng.poisson(weights)
    return ClusterSizes(tuple(int(x) for x in counts if x > 0))
