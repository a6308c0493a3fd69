"""Log-space scalar kernels shared by every other module.

All cluster-structure likelihoods in this package are built from gamma
ratios and generalized Stirling numbers of the first kind, whose raw
values overflow double precision near n = 170 while the datasets of
interest reach n = 2586.  Everything here therefore lives in log space.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

NEG_INF = float("-inf")

# Below this n the gamma-ratio log is accumulated as an explicit sum of
# logs (exact to rounding); above it the lgamma difference is cheaper.
_RATIO_SUM_CUTOFF = 64


def log_sum_exp(values) -> float:
    """log(sum(exp(values))) via max shifting.

    Accepts any sequence of reals, possibly containing -inf entries.
    Returns -inf for an empty sequence or when every entry is -inf.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return NEG_INF
    m = float(np.max(arr))
    if math.isinf(m):
        return m
    return m + math.log(float(np.sum(np.exp(arr - m))))


def _log_gamma_ratio_sum(n: int, a: float) -> float:
    if n == 1:
        return 0.0
    return float(np.sum(np.log(np.arange(1, n, dtype=float) - a)))


def _log_gamma_ratio_lgamma(n: int, a: float) -> float:
    return float(gammaln(n - a) - gammaln(1.0 - a))


def log_gamma_ratio(n: int, a: float) -> float:
    """log(Gamma(n - a) / Gamma(1 - a)) for integer n >= 1 and a < 1.

    Equals sum_{i=1}^{n-1} log(i - a); every factor is positive since
    a < 1.  Small n uses the explicit sum, large n the lgamma difference.
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if a >= 1.0:
        raise ValueError(f"discount must satisfy a < 1, got {a}")
    if n <= _RATIO_SUM_CUTOFF:
        return _log_gamma_ratio_sum(n, a)
    return _log_gamma_ratio_lgamma(n, a)


def gamma_ratio_signed(n: int, x: float) -> tuple[int, float]:
    """Gamma(n + x) / Gamma(x) as (sign, log magnitude).

    Computed as the product prod_{i=0}^{n-1} (i + x), which stays well
    defined at nonpositive x where Gamma itself has poles.  A zero factor
    yields (0, -inf).
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    sign = 1
    log_mag = 0.0
    for i in range(n):
        f = i + x
        if f == 0.0:
            return 0, NEG_INF
        if f < 0.0:
            sign = -sign
        log_mag += math.log(abs(f))
    return sign, log_mag


class LogStirlingTable:
    """Triangular table of log S_a(n, l), generalized Stirling numbers
    of the first kind with discount a < 1.

    Row n holds entries for l = 0..n; S_a(0, 0) = 1 by convention and
    S_a(n, 0) = 0 for n >= 1.  Rows are filled by the two-term recursion

        S_a(n + 1, l) = (n - a l) S_a(n, l) + S_a(n, l - 1)

    with S_a(n, 1) = Gamma(n - a) / Gamma(1 - a) and S_a(n, n) = 1
    falling out of the boundary handling.  Since a < 1 and l <= n, the
    coefficient n - a l is always positive and the recursion is a pure
    sum of positive terms, so it is evaluated with two-term log-add-exp.

    The table can be extended in place via :meth:`ensure`; extension is
    not thread safe, but a fully built table is immutable in practice
    and safe to read from many threads.
    """

    def __init__(self, max_n: int, a: float):
        if max_n < 0:
            raise ValueError(f"max_n must be nonnegative, got {max_n}")
        if a >= 1.0:
            raise ValueError(f"discount must satisfy a < 1, got {a}")
        self.a = float(a)
        self._rows: list[np.ndarray] = [np.zeros(1)]
        self._grow(max_n)

    @property
    def max_n(self) -> int:
        return len(self._rows) - 1

    def ensure(self, n: int) -> None:
        """Extend the table so that row n exists (no-op if it does)."""
        if n > self.max_n:
            self._grow(n)

    def _grow(self, new_max: int) -> None:
        a = self.a
        for n in range(self.max_n, new_max):
            prev = self._rows[n]
            nxt = np.empty(n + 2)
            nxt[0] = NEG_INF
            if n >= 1:
                l = np.arange(1, n + 1, dtype=float)
                stay = np.log(n - a * l) + prev[1:]
                nxt[1 : n + 1] = np.logaddexp(stay, prev[:n])
            nxt[n + 1] = prev[n]
            self._rows.append(nxt)

    def row(self, n: int) -> np.ndarray:
        """Log row for sample size n, indexed by l = 0..n.  Do not mutate."""
        self.ensure(n)
        return self._rows[n]

    def entry(self, n: int, l: int) -> float:
        """log S_a(n, l)."""
        if n < 0 or l < 0 or l > n:
            raise ValueError(f"invalid Stirling index (n={n}, l={l})")
        self.ensure(n)
        return float(self._rows[n][l])


def build_stirling_table(max_n: int, a: float) -> LogStirlingTable:
    """Build log S_a(n, l) rows for all n up to max_n."""
    if max_n < 1:
        raise ValueError(f"max_n must be a positive integer, got {max_n}")
    return LogStirlingTable(max_n, a)
