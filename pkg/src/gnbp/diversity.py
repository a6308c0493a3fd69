"""Simpson's index of diversity: the unbiased sample estimate, the
model-based pair-distinctness probabilities (at fixed and at random
sample size), and order-statistics summaries of posterior draws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core_math import NEG_INF, LogStirlingTable, log_sum_exp
from .distributions import (
    ClusterSizes,
    Params,
    gnb_mean,
    kappa,
    log_weighted_stirling_sum,
    sample_cluster_structure,
)
from .partitions import LogRTable

# Above this marginal mean the exact truncated sum becomes expensive
# (its cost grows quadratically in the truncation point), so "auto"
# mode falls back to Monte Carlo.
_EXACT_MEAN_LIMIT = 500.0


class TruncationShortfallWarning(UserWarning):
    """Emitted when the hard cap on the truncated sum binds before the
    requested tail mass has been reached."""


@dataclass(frozen=True)
class DiversityConfig:
    """Controls evaluation of the random-sample-size diversity index.

    mode "exact-truncated" sums the series over n until the cumulative
    marginal mass reaches 1 - tail_epsilon (hard-capped at n_cap);
    "monte-carlo" averages the fixed-n probability over mc_draws
    simulated sample sizes; "auto" picks exact-truncated unless the
    marginal mean exceeds 500.
    """

    mode: str = "auto"
    tail_epsilon: float = 1e-8
    n_cap: int = 2000
    mc_draws: int = 20

    def __post_init__(self):
        if self.mode not in ("auto", "exact-truncated", "monte-carlo"):
            raise ValueError(f"unknown diversity mode {self.mode!r}")
        if not 0.0 < self.tail_epsilon < 1.0:
            raise ValueError("tail_epsilon must lie in (0, 1)")
        if self.n_cap < 2:
            raise ValueError("n_cap must be at least 2")
        if self.mc_draws < 1:
            raise ValueError("mc_draws must be positive")


def simpson_sample_estimate(sizes: ClusterSizes) -> float:
    """Unbiased sample estimate 1 - sum_k n_k (n_k - 1) / (n (n - 1))."""
    n = sizes.n
    if n < 2:
        raise ValueError("the sample estimate needs at least two individuals")
    same_pairs = sum(s * (s - 1) for s in sizes.sizes)
    return 1.0 - same_pairs / (n * (n - 1))


def prob_distinct_pair(n: int, params: Params, rtable: LogRTable) -> float:
    """Probability that two elements of a size-n sample fall in different
    clusters: gamma0 p^{-a} R(2, 2) / R(1, 1).  Constant in n only at
    a = 0, where it equals gamma0 / (1 + gamma0)."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if rtable.n != n or rtable.params != params:
        raise ValueError("R table does not match the requested (n, params)")
    if not (rtable.has_row(1) and rtable.has_row(2)):
        raise ValueError("R table must retain rows 1 and 2")
    log_unit = math.log(params.gamma0) - params.a * math.log(params.p)
    return math.exp(log_unit + rtable.entry(2, 2) - rtable.entry(1, 1))


def _advance_path_weights(v: np.ndarray, n: int, j_lo: int, a: float,
                          log_unit: float) -> np.ndarray:
    """One forward step of the allocation-path recursion.

    v holds log path weights over states j = j_lo..n at level n; the
    returned vector covers j = j_lo..n+1 at level n+1 under

        V_{n+1}(j) = (n - a j) V_n(j) + gamma0 p^{-a} V_n(j - 1).
    """
    js = np.arange(j_lo, n + 1, dtype=float)
    stay = np.log(n - a * js) + v
    return np.logaddexp(
        np.append(stay, NEG_INF), np.concatenate(([NEG_INF], v + log_unit))
    )


def _log_pair_curves(
    params: Params, n_max: int, wanted: set[int] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """log R_n(1, 1) for n = 1..n_max and log R_n(2, 2) for n = 2..n_max,
    all in one forward sweep.

    Summing path weights from a fixed start state reproduces the backward
    recursion's values for every horizon n simultaneously, so evaluating
    the pair-distinctness probability over many sample sizes costs the
    same as one table build.  When ``wanted`` is given, the sums are only
    materialized at those horizons (other entries stay NaN).
    """
    if n_max < 2:
        raise ValueError(f"need n_max >= 2, got {n_max}")
    a = params.a
    log_unit = math.log(params.gamma0) - a * math.log(params.p)
    log_r11 = np.full(n_max + 1, np.nan)
    log_r22 = np.full(n_max + 1, np.nan)
    v11 = np.array([0.0])
    log_r11[1] = 0.0
    v22 = np.array([0.0])
    log_r22[2] = 0.0
    for n in range(1, n_max):
        v11 = _advance_path_weights(v11, n, 1, a, log_unit)
        if n >= 2:
            v22 = _advance_path_weights(v22, n, 2, a, log_unit)
        if wanted is None or n + 1 in wanted:
            log_r11[n + 1] = log_sum_exp(v11)
            if n >= 2:
                log_r22[n + 1] = log_sum_exp(v22)
    return log_r11, log_r22


def _simpson_theta_exact(params: Params, stirling: LogStirlingTable,
                         config: DiversityConfig) -> float:
    """Truncated evaluation of the random-n diversity index.

    Each term of the series is P(distinct | n) * p_N(n), which reduces to
    gamma0^2 p^{-2a} e^{-gamma0 kappa} (p^n / n!) R_n(2, 2).  The
    R_n(2, 2) values for every n come from one forward path-weight sweep
    (see _advance_path_weights) instead of one backward table per n, so
    the whole sum costs as much as a single table build.
    """
    g0k = params.gamma0 * kappa(params)
    lp = math.log(params.p)
    log_unit = math.log(params.gamma0) - params.a * lp
    a = params.a

    cum = math.exp(-g0k) + math.exp(math.log(params.gamma0) + (1.0 - a) * lp - g0k)
    threshold = 1.0 - config.tail_epsilon

    num_terms: list[float] = []
    den_terms: list[float] = []
    v = np.array([0.0])  # log V_2(j), states j = 2..n
    n = 2
    while True:
        log_r22 = log_sum_exp(v)
        log_w = (
            n * lp
            - float(gammaln(n + 1))
            - g0k
            + log_weighted_stirling_sum(n, params, stirling)
        )
        den_terms.append(log_w)
        num_terms.append(2.0 * log_unit + log_r22 + n * lp - float(gammaln(n + 1)) - g0k)
        cum += math.exp(log_w)
        if cum >= threshold:
            break
        if n >= config.n_cap:
            warnings.warn(
                f"truncation cap n_cap={config.n_cap} reached with "
                f"{1.0 - cum:.3e} marginal mass unaccounted for "
                f"(requested tail {config.tail_epsilon:.1e})",
                TruncationShortfallWarning,
                stacklevel=3,
            )
            break
        v = _advance_path_weights(v, n, 2, a, log_unit)
        n += 1
    return math.exp(log_sum_exp(num_terms) - log_sum_exp(den_terms))


def _simpson_theta_mc(params: Params, config: DiversityConfig,
                      rng: np.random.Generator) -> float:
    sizes: list[int] = []
    attempts = 0
    max_attempts = 10_000 * config.mc_draws
    while len(sizes) < config.mc_draws:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError(
                "rejection sampling of sample sizes >= 2 is not terminating; "
                "the marginal mass below 2 is too large for Monte Carlo mode"
            )
        n = sample_cluster_structure(params, rng).n
        if n >= 2:
            sizes.append(n)
    log_r11, log_r22 = _log_pair_curves(params, max(sizes), wanted=set(sizes))
    log_unit = math.log(params.gamma0) - params.a * math.log(params.p)
    vals = np.exp(log_unit + log_r22[sizes] - log_r11[sizes])
    return float(np.mean(vals))


def simpson_theta(
    params: Params,
    stirling: LogStirlingTable,
    config: DiversityConfig | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Diversity index at fixed parameters with the sample size random:

        sum_{n>=2} P(distinct | n) p_N(n) / (1 - p_N(0) - p_N(1)).

    In exact-truncated mode the series is summed until the cumulative
    marginal mass reaches 1 - tail_epsilon (capped at n_cap, with a
    warning if the cap binds) and renormalized over the included terms.
    Monte Carlo mode instead averages P(distinct | n) over simulated
    sizes conditioned on n >= 2 by rejection, and requires an rng.
    """
    if config is None:
        config = DiversityConfig()
    mode = config.mode
    if mode == "auto":
        mode = "monte-carlo" if gnb_mean(params) > _EXACT_MEAN_LIMIT else "exact-truncated"
    if mode == "exact-truncated":
        return _simpson_theta_exact(params, stirling, config)
    if rng is None:
        raise ValueError("monte-carlo mode needs an rng")
    return _simpson_theta_mc(params, config, rng)


@dataclass(frozen=True)
class PosteriorSummary:
    """Order-statistics summary of a set of posterior draws."""

    mean: float
    median: float
    lo50: float
    hi50: float
    lo95: float
    hi95: float

    def covers50(self, value: float) -> bool:
        return self.lo50 <= value <= self.hi50

    def covers95(self, value: float) -> bool:
        return self.lo95 <= value <= self.hi95


def summarize(values) -> PosteriorSummary:
    """Mean, median, and central 50% / 95% ranges with linear
    interpolation between order statistics."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty set of draws")
    lo95, lo50, med, hi50, hi95 = np.percentile(arr, [2.5, 25.0, 50.0, 75.0, 97.5])
    return PosteriorSummary(
        mean=float(np.mean(arr)),
        median=float(med),
        lo50=float(lo50),
        hi50=float(hi50),
        lo95=float(lo95),
        hi95=float(hi95),
    )


def posterior_simpson(draws) -> PosteriorSummary:
    """Summarize diversity values from posterior draws.

    Accepts an iterable of plain values or of (params, value) pairs.
    """
    values = []
    for d in draws:
        if isinstance(d, (tuple, list)):
            values.append(float(d[1]))
        else:
            values.append(float(d))
    return summarize(values)
