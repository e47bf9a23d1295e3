"""Expected alignments for hard monotonic attention, and MILk soft attention.

A stepwise probability matrix p gives, for target step i and source
position j, the probability that the attention head stops at j. The
expected alignment alpha is the marginal distribution of the stopping
position under the monotone process where each head starts from the
previous row's stop. Two evaluations of the same recurrence ship here:

* expected_alignment_div: the division-based vectorized evaluation,
  alpha_i = p_i * cumprod * cumsum(alpha_{i-1} / cumprod), with the
  cumulative product guarded away from underflow. Once the true product
  drops below the guard the ratio stops telescoping and stale mass is
  re-added at every later position, so the row sums grow geometrically.
  Kept as the cautionary baseline; do not use downstream.
* expected_alignment_stable: the division-free sequential recurrence
  q_{i,j} = (1 - p_{i,j-1}) q_{i,j-1} + alpha_{i-1,j}; alpha = p * q.
  Row-stochastic to 1e-9 at any practical size.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

DIV_GUARD_EPS = 1e-6
ENUMERATION_LIMIT = 8


class ShapeError(ValueError):
    pass


class SizeLimitError(ValueError):
    pass


def validate_stepwise(p: np.ndarray) -> np.ndarray:
    """Check p is N x M with entries in (0,1] and an all-ones last column."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.size == 0:
        raise ShapeError(f"expected non-empty 2-d matrix, got shape {p.shape}")
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise ValueError("stepwise probabilities must lie in (0, 1]")
    if not np.all(p[:, -1] == 1.0):
        raise ValueError("last column must be exactly 1 (no mass may pass the source end)")
    return p


def with_closed_last_column(p: np.ndarray) -> np.ndarray:
    """Copy of p with the last column forced to 1."""
    p = np.array(p, dtype=np.float64, copy=True)
    p[:, -1] = 1.0
    return p


def _exclusive_survival(row: np.ndarray) -> np.ndarray:
    """cp_j = prod_{l<j} (1 - p_l), the probability of not stopping before j."""
    return np.cumprod(np.concatenate(([1.0], 1.0 - row[:-1])))


def expected_alignment_div(p: np.ndarray) -> np.ndarray:
    """Division-based evaluation of the alignment recurrence.

    The guarded cumulative product appears both as a factor and as a
    divisor; wherever the guard binds, the two no longer cancel and the
    output is garbage (entries far above 1, or non-finite). That failure
    is intentional and covered by tests; use expected_alignment_stable
    for real work.
    """
    p = validate_stepwise(p)
    N, M = p.shape
    alpha = np.zeros((N, M))
    prev = np.zeros(M)
    prev[0] = 1.0
    for i in range(N):
        cp = np.clip(_exclusive_survival(p[i]), DIV_GUARD_EPS, 1.0)
        alpha[i] = p[i] * cp * np.cumsum(prev / cp)
        prev = alpha[i]
    return alpha


def expected_alignment_stable(p: np.ndarray) -> np.ndarray:
    """Division-free evaluation; rows sum to 1 within 1e-9."""
    p = validate_stepwise(p)
    N, M = p.shape
    alpha = np.zeros((N, M))
    prev = np.zeros(M)
    prev[0] = 1.0
    for i in range(N):
        row_p = p[i]
        row_a = alpha[i]
        # q carries mass not yet stopped: survivors from j-1 plus new arrivals
        q = prev[0]
        row_a[0] = row_p[0] * q
        for j in range(1, M):
            q = (1.0 - row_p[j - 1]) * q + prev[j]
            row_a[j] = row_p[j] * q
        prev = row_a
    return alpha


def enumerate_alignment_oracle(p: np.ndarray) -> np.ndarray:
    """Exact expected alignment by summing over every monotone stop path.

    Exponential in N; guarded to N, M <= 8. Exact rational arithmetic,
    so the result is correct to the last bit of the float conversion.
    """
    p = validate_stepwise(p)
    N, M = p.shape
    if N > ENUMERATION_LIMIT or M > ENUMERATION_LIMIT:
        raise SizeLimitError(f"enumeration limited to {ENUMERATION_LIMIT}, got {N}x{M}")
    pf = [[Fraction(float(x)) for x in row] for row in p]
    one = Fraction(1)
    acc = [[Fraction(0)] * M for _ in range(N)]

    def walk(i: int, start: int, weight: Fraction):
        if weight == 0:
            return
        if i == N:
            return
        survive = one
        for j in range(start, M):
            stop = weight * survive * pf[i][j]
            acc[i][j] += stop
            walk(i + 1, j, stop)
            survive *= one - pf[i][j]

    walk(0, 0, one)
    return np.array([[float(x) for x in row] for row in acc])


def milk_soft_attention(alpha: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Infinite-lookback soft attention expected under the alignment.

    beta_{i,j} = sum_{k>=j} alpha_{i,k} * exp(u_{i,j}) / sum_{l<=k} exp(u_{i,l})

    Evaluated in O(N*M) per call: prefix normalizers are shifted by the
    row max (the shift cancels between numerator and denominator), and
    the k-sum is a single reverse cumulative sum.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if alpha.shape != u.shape or alpha.ndim != 2:
        raise ShapeError(f"alpha {alpha.shape} and u {u.shape} must be equal 2-d shapes")
    if not np.all(np.isfinite(u)):
        raise ValueError("energies must be finite")
    e = np.exp(u - u.max(axis=1, keepdims=True))
    prefix = np.cumsum(e, axis=1)
    ratio = alpha / prefix
    suffix = np.cumsum(ratio[:, ::-1], axis=1)[:, ::-1]
    return e * suffix


def spiky_low_probability_matrix(
    n: int = 200, m: int = 200, seed: int = 32, spike_rate: float = 0.06
) -> np.ndarray:
    """Stress input for the division-form evaluation.

    Mostly tiny stop probabilities (log-uniform over [1e-4, 2e-2]) with
    a sparse sprinkle of near-one spikes. The spikes drive the survival
    product under the division guard, at which point the division form
    diverges while the stable form stays row-stochastic.
    """
    rng = np.random.default_rng(seed)
    p = np.exp(rng.uniform(np.log(1e-4), np.log(2e-2), size=(n, m)))
    spikes = rng.random(size=(n, m)) < spike_rate
    p[spikes] = rng.uniform(0.8, 0.999, size=int(spikes.sum()))
    p[:, -1] = 1.0
    return p
