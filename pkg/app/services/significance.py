import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy import stats

from app.core.errors import StatisticsInputError

KS_TERM_EPS = 1e-10
KS_MAX_TERMS = 1000


def kolmogorov_p(d: float, n_a: int, n_b: int) -> float:
    """Asymptotic two-sided p-value of the two-sample KS statistic ``d``."""
    n_e = n_a * n_b / (n_a + n_b)
    sq = math.sqrt(n_e)
    lam = (sq + 0.12 + 0.11 / sq) * d
    if lam == 0.0:
        return 1.0
    total = 0.0
    for k in range(1, KS_MAX_TERMS + 1):
        term = (-1) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < KS_TERM_EPS:
            return min(1.0, max(0.0, 2.0 * total))
    # no convergence only for vanishing lambda, where the samples are indistinguishable
    return 1.0


def ks_two_sample(sample_a: Sequence[float], sample_b: Sequence[float]) -> Tuple[float, float]:
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise StatisticsInputError("the KS test needs two non-empty samples")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    return d, kolmogorov_p(d, a.size, b.size)


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> Tuple[float, float]:
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise StatisticsInputError(f"paired samples differ in length: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise StatisticsInputError("the paired t-test needs at least two pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return t, min(1.0, p)


def bonferroni_adjust(p_values: Sequence[float], n_tests: int) -> List[float]:
    if n_tests < 1:
        raise StatisticsInputError(f"number of tests must be positive, got {n_tests}")
    out = []
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise StatisticsInputError(f"p-value {p} outside [0, 1]")
        out.append(min(1.0, n_tests * p))
    return out
