"""Variational read/write policies over monotone action paths.

A policy decides, at each state (w tokens written, r segments read),
whether to WRITE the next token or READ the next segment. Decisions at
states where only one action is legal (nothing read yet, source
exhausted, target complete) are forced and never enter any likelihood.

Two samplers ship:

* a change-point sampler: the action flips with probability
  p*_k = (1 - exp(-lam * (k - k_last)^2)) * f(w, r), where k_last is
  the step of the most recent flip and f is a context score. Larger
  lam makes flips cheaper, so traces interleave reads and writes more
  finely.
* a table sampler: independent Bernoulli write-probabilities per state,
  used as the posterior in the evidence-bound estimate.

Path log-probabilities, the posterior/prior log-ratio, Monte Carlo and
exact evidence-bound evaluation, and the standard priors live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .actions import Action, validate_trace

PROB_CLAMP = 1e-7

# free-state table lookups outside (PROB_CLAMP, 1-PROB_CLAMP) are clamped
# and counted here; read via clamp_warning_count(), reset for tests
_clamp_warnings = 0


def clamp_warning_count() -> int:
    return _clamp_warnings


def reset_clamp_warnings() -> None:
    global _clamp_warnings
    _clamp_warnings = 0


def _clamped(value: float) -> float:
    global _clamp_warnings
    if value < PROB_CLAMP:
        _clamp_warnings += 1
        return PROB_CLAMP
    if value > 1.0 - PROB_CLAMP:
        _clamp_warnings += 1
        return 1.0 - PROB_CLAMP
    return value


class InvalidTraceError(ValueError):
    pass


class EvaluationError(RuntimeError):
    pass


class ContextScorer(Protocol):
    """Score in (0,1) for flipping toward WRITE-ish behavior at a state."""

    def score(self, tgt_written: int, src_read: int) -> float: ...


@dataclass(frozen=True)
class ConstantScorer:
    value: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.value < 1.0:
            raise ValueError("score must be strictly inside (0,1)")

    def score(self, tgt_written: int, src_read: int) -> float:
        return self.value


@dataclass(frozen=True)
class OracleScorer:
    """High score once enough source is in to predict the next token.

    alignment holds a*(i): segments needed before target token i is
    determined. Scores stay strictly inside (0,1).
    """

    alignment: tuple[int, ...]
    low: float = 0.02
    high: float = 0.98

    def score(self, tgt_written: int, src_read: int) -> float:
        nxt = min(tgt_written, len(self.alignment) - 1)
        return self.high if src_read >= self.alignment[nxt] else self.low


@dataclass(frozen=True)
class TableScorer:
    """Scores read straight out of a (tgt_len, src_len) table."""

    table: tuple[tuple[float, ...], ...]

    @classmethod
    def from_array(cls, arr) -> "TableScorer":
        return cls(tuple(tuple(float(x) for x in row) for row in np.asarray(arr)))

    def score(self, tgt_written: int, src_read: int) -> float:
        i = min(tgt_written, len(self.table) - 1)
        j = min(max(src_read, 1), len(self.table[0])) - 1
        return min(max(self.table[i][j], PROB_CLAMP), 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class ChangeTrace:
    """Flip indicators z*_k over the M+N decision steps, starting from READ."""

    changes: tuple[int, ...]
    forced: tuple[bool, ...]
    src_len: int
    tgt_len: int

    def __post_init__(self):
        if len(self.changes) != self.src_len + self.tgt_len:
            raise InvalidTraceError("change trace must cover exactly M+N decisions")
        if len(self.forced) != len(self.changes):
            raise InvalidTraceError("forced mask length mismatch")

    @property
    def n_changes(self) -> int:
        return sum(self.changes)

    @property
    def n_sampled_changes(self) -> int:
        return sum(c for c, f in zip(self.changes, self.forced) if not f)


def change_to_actions(trace: ChangeTrace) -> list[Action]:
    """Unfold flips into actions; initial action is READ."""
    cur = Action.READ
    out = []
    first = True
    for z in trace.changes:
        if z and not first:
            cur = Action.WRITE if cur is Action.READ else Action.READ
        elif z and first:
            raise InvalidTraceError("cannot flip before the first read")
        out.append(cur)
        first = False
    check = validate_trace(out, trace.src_len, trace.tgt_len)
    if not check.ok:
        raise InvalidTraceError(check.reason)
    return out


def actions_to_changes(actions: Sequence[Action], forced=None) -> ChangeTrace:
    """Inverse of change_to_actions; round-trips exactly."""
    if not actions or actions[0] is not Action.READ:
        raise InvalidTraceError("trace must begin with READ")
    changes = []
    prev = Action.READ
    for idx, a in enumerate(actions):
        changes.append(0 if idx == 0 else int(a is not prev))
        prev = a
    M = sum(1 for a in actions if a is Action.READ)
    N = len(actions) - M
    if forced is None:
        forced = _forced_mask(actions, M, N)
    return ChangeTrace(tuple(changes), tuple(forced), M, N)


def _forced_mask(actions: Sequence[Action], M: int, N: int) -> tuple[bool, ...]:
    """Steps where the state machine left no choice."""
    w = r = 0
    out = []
    for a in actions:
        out.append(r == 0 or r == M or w == N)
        if a is Action.READ:
            r += 1
        else:
            w += 1
    return tuple(out)


def actions_to_alignment(actions: Sequence[Action], M: int, N: int) -> np.ndarray:
    """Hard alignment: row i is one-hot at the source position of WRITE i."""
    check = validate_trace(actions, M, N)
    if not check.ok:
        raise InvalidTraceError(check.reason)
    align = np.zeros((N, M))
    w = r = 0
    for a in actions:
        if a is Action.READ:
            r += 1
        else:
            if r == 0:
                raise InvalidTraceError("write before any read")
            align[w, r - 1] = 1.0
            w += 1
    return align


def alignment_to_actions(align: np.ndarray) -> list[Action]:
    """Inverse of actions_to_alignment for hard (one-hot-row) matrices."""
    align = np.asarray(align)
    N, M = align.shape
    positions = []
    for i in range(N):
        js = np.flatnonzero(align[i])
        if len(js) != 1 or align[i, js[0]] != 1.0:
            raise InvalidTraceError(f"row {i} is not one-hot")
        positions.append(int(js[0]) + 1)
    from .actions import trace_from_consumption

    return trace_from_consumption(positions, M)


def change_probability(lam: float, gap: int, score: float) -> float:
    """p* = (1 - exp(-lam * gap^2)) * score; zero at gap 0 by construction."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return (1.0 - math.exp(-lam * gap * gap)) * score


def sample_change_trace(
    scorer: ContextScorer, lam: float, src_len: int, tgt_len: int, rng_seed: int
) -> ChangeTrace:
    """Draw one action path from the change-point policy.

    The scorer gives the write-propensity f at the current state. A
    READ run flips with probability (1 - exp(-lam * gap^2)) * f, a
    WRITE run with the mirrored (1 - f), gap being the distance to the
    last flip. The gap term starts at zero, so a flip can never
    immediately follow another (or precede the first read).
    Boundary-forced steps bypass sampling entirely and reset the gap
    when they flip the action.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    rng = np.random.default_rng(rng_seed)
    M, N = src_len, tgt_len
    w = r = 0
    cur = Action.READ
    k_last = 1
    changes, forced = [], []
    for k in range(1, M + N + 1):
        if r == M and w < N:
            # no source left: every remaining action is WRITE
            z, is_forced = int(cur is Action.READ), True
        elif w == N:
            z, is_forced = int(cur is Action.WRITE), True
        elif r == 0:
            z, is_forced = 0, True
        else:
            f = scorer.score(w, r)
            toward_write = f if cur is Action.READ else 1.0 - f
            p_star = change_probability(lam, k - k_last, toward_write)
            z, is_forced = int(rng.random() < p_star), False
        if z:
            cur = Action.WRITE if cur is Action.READ else Action.READ
            k_last = k
        changes.append(z)
        forced.append(is_forced)
        if cur is Action.READ:
            r += 1
        else:
            w += 1
    return ChangeTrace(tuple(changes), tuple(forced), M, N)


def sample_trace_from_table(
    table: np.ndarray, src_len: int, tgt_len: int, rng_seed: int
) -> list[Action]:
    """Draw one action path from per-state Bernoulli write-probabilities."""
    table = np.asarray(table, dtype=np.float64)
    _check_table(table, src_len, tgt_len)
    rng = np.random.default_rng(rng_seed)
    return _walk_table(table, src_len, tgt_len, lambda p: rng.random() < p)


def _walk_table(table, M, N, decide: Callable[[float], bool]) -> list[Action]:
    w = r = 0
    out = []
    while w < N or r < M:
        if r == 0 or w == N:
            a = Action.READ
        elif r == M:
            a = Action.WRITE
        else:
            a = Action.WRITE if decide(_clamped(float(table[w, r - 1]))) else Action.READ
        out.append(a)
        if a is Action.READ:
            r += 1
        else:
            w += 1
    return out


def _check_table(table: np.ndarray, M: int, N: int) -> None:
    if table.shape != (N, M):
        raise ValueError(f"policy table must be {N}x{M}, got {table.shape}")


def path_log_prob(actions: Sequence[Action], table: np.ndarray, M: int, N: int) -> float:
    """log-probability of the trace under a table policy, free steps only."""
    table = np.asarray(table, dtype=np.float64)
    _check_table(table, M, N)
    check = validate_trace(actions, M, N)
    if not check.ok:
        raise InvalidTraceError(check.reason)
    w = r = 0
    total = 0.0
    for a in actions:
        free = not (r == 0 or r == M or w == N)
        if free:
            p_write = _clamped(float(table[w, r - 1]))
            total += math.log(p_write if a is Action.WRITE else 1.0 - p_write)
        if a is Action.READ:
            r += 1
        else:
            w += 1
    return total


def path_log_ratio(
    actions: Sequence[Action], phi: np.ndarray, omega: np.ndarray, M: int, N: int
) -> float:
    """log q_phi(trace) - log p_omega(trace); zero when the tables agree."""
    return path_log_prob(actions, phi, M, N) - path_log_prob(actions, omega, M, N)


def enumerate_traces(M: int, N: int, limit: int = 12) -> list[list[Action]]:
    """All valid action paths from (0,0) to (N,M); exponential, small only."""
    if M > limit or N > limit:
        raise ValueError(f"enumeration limited to {limit}, got {M}x{N}")
    out: list[list[Action]] = []

    def walk(w, r, prefix):
        if w == N and r == M:
            out.append(list(prefix))
            return
        if r < M and w < N and r > 0:
            walk(w, r + 1, prefix + [Action.READ])
            walk(w + 1, r, prefix + [Action.WRITE])
        elif r == 0 or w == N:
            walk(w, r + 1, prefix + [Action.READ])
        else:  # r == M, w < N
            walk(w + 1, r, prefix + [Action.WRITE])

    walk(0, 0, [])
    return out


def estimate_elbo(
    likelihood: Callable[[np.ndarray], float],
    phi: np.ndarray,
    omega: np.ndarray,
    src_len: int,
    tgt_len: int,
    n_samples: int,
    rng_seed: int,
) -> tuple[float, float, float]:
    """Monte Carlo evidence bound: mean loglik minus mean log-ratio.

    Traces are sampled from the phi table; the likelihood callable takes
    the hard alignment matrix of each sampled trace. Returns
    (elbo, kl_estimate, loglik_estimate).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    phi = np.asarray(phi, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    M, N = src_len, tgt_len
    _check_table(phi, M, N)
    _check_table(omega, M, N)
    rng = np.random.default_rng(rng_seed)
    loglik_sum = 0.0
    ratio_sum = 0.0
    for s in range(n_samples):
        actions = _walk_table(phi, M, N, lambda p: rng.random() < p)
        ll = float(likelihood(actions_to_alignment(actions, M, N)))
        if not math.isfinite(ll):
            raise EvaluationError(f"non-finite likelihood at sample {s}")
        loglik_sum += ll
        ratio_sum += path_log_ratio(actions, phi, omega, M, N)
    loglik = loglik_sum / n_samples
    kl = ratio_sum / n_samples
    return loglik - kl, kl, loglik


def exact_elbo(
    likelihood: Callable[[np.ndarray], float],
    phi: np.ndarray,
    omega: np.ndarray,
    src_len: int,
    tgt_len: int,
) -> tuple[float, float]:
    """Exact (elbo, log_marginal) by enumerating every trace. Small only.

    The bound elbo <= log_marginal holds for any posterior table.
    """
    phi = np.asarray(phi, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    M, N = src_len, tgt_len
    _check_table(phi, M, N)
    _check_table(omega, M, N)
    elbo = 0.0
    marginal = 0.0
    for actions in enumerate_traces(M, N):
        lp_phi = path_log_prob(actions, phi, M, N)
        lp_omega = path_log_prob(actions, omega, M, N)
        ll = float(likelihood(actions_to_alignment(actions, M, N)))
        q = math.exp(lp_phi)
        elbo += q * (ll - (lp_phi - lp_omega))
        marginal += math.exp(lp_omega + ll)
    return elbo, math.log(marginal)


def diagonal_prior(src_len: int, tgt_len: int, sharpness: float = 2.0) -> np.ndarray:
    """Write-probabilities rising logistically across the j = i*M/N line."""
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    i = np.arange(1, tgt_len + 1)[:, None]
    j = np.arange(1, src_len + 1)[None, :]
    x = sharpness * (j - i * src_len / tgt_len)
    return 1.0 / (1.0 + np.exp(-x))
