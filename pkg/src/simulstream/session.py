"""Streaming session simulation with dual clocks.

A session replays a read/write schedule against an utterance whose
source segments arrive at fixed intervals. Two clocks advance over the
same event sequence:

* the ideal clock moves only by waiting for segment arrivals;
* the computation-aware clock additionally charges a compute model for
  every decision and every synthesized unit.

Target tokens expand into a fixed number of discrete units; a synthesis
stub is called once every emission_rate_l buffered units (plus a final
flush) and emits an audio span on the playback timeline. A token's
delay is the clock reading of the call that produced its last unit.

All internal times are integer microseconds so long sessions cannot
drift; reports are in milliseconds.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

from .actions import Action, validate_trace, wait_k_trace
from .corpus import Utterance, quality_score
from .latency import COMPUTATION_AWARE, IDEAL, DelayProfile, LatencyReport, build_report
from .vmma import ConstantScorer, OracleScorer, change_to_actions, sample_change_trace

GUESS_BASE = 1 << 20  # synthetic wrong guesses live far outside any vocab
GUESS_SPACE = 1009

FIXED_COST = "fixed_cost"
MEASURED = "measured_wallclock"


class SessionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ComputeModel:
    kind: str = FIXED_COST
    per_decision_ms: float = 0.0
    per_unit_ms: float = 0.0

    def __post_init__(self):
        if self.kind not in (FIXED_COST, MEASURED):
            raise ValueError(f"unknown compute model {self.kind!r}")
        if self.per_decision_ms < 0 or self.per_unit_ms < 0:
            raise ValueError("compute costs must be non-negative")


@dataclass(frozen=True)
class PolicySpec:
    kind: str  # waitk | offline | vmma
    k: int = 1
    lam: float = 0.5
    scorer: str = "oracle"  # oracle | constant
    scorer_value: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("waitk", "offline", "vmma"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "waitk" and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.kind == "vmma" and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.scorer not in ("oracle", "constant"):
            raise ValueError(f"unknown scorer {self.scorer!r}")

    def label(self) -> str:
        if self.kind == "waitk":
            return f"waitk-{self.k}"
        if self.kind == "offline":
            return "offline"
        return f"vmma-{self.lam}"


@dataclass(frozen=True)
class SessionConfig:
    policy: PolicySpec
    pre_decision_ms: Optional[float] = None  # None: use the utterance's own
    emission_rate_l: int = 1
    unit_ms: float = 20.0
    units_per_token: int = 5
    compute: ComputeModel = field(default_factory=ComputeModel)

    def __post_init__(self):
        if self.emission_rate_l < 1:
            raise ValueError("emission_rate_l must be >= 1")
        if self.units_per_token < 1:
            raise ValueError("units_per_token must be >= 1")
        if self.unit_ms <= 0:
            raise ValueError("unit_ms must be positive")
        if self.pre_decision_ms is not None and self.pre_decision_ms <= 0:
            raise ValueError("pre_decision_ms must be positive")


class Policy(Protocol):
    def plan(self, utterance: Utterance) -> list[Action]: ...


@dataclass(frozen=True)
class WaitKPolicy:
    k: int

    def plan(self, utterance: Utterance) -> list[Action]:
        return wait_k_trace(self.k, utterance.source_len, utterance.target_len)


@dataclass(frozen=True)
class OfflinePolicy:
    def plan(self, utterance: Utterance) -> list[Action]:
        return wait_k_trace(utterance.source_len, utterance.source_len, utterance.target_len)


def stable_utterance_seed(base_seed: int, utt_id: str) -> int:
    """Per-utterance RNG seed that survives process restarts."""
    return (base_seed * 2654435761 + zlib.crc32(utt_id.encode())) % (1 << 63)


@dataclass(frozen=True)
class VmmaPolicy:
    lam: float
    scorer: str = "oracle"
    scorer_value: float = 0.5
    seed: int = 0

    def plan(self, utterance: Utterance) -> list[Action]:
        if self.scorer == "oracle":
            scorer = OracleScorer(utterance.oracle_alignment)
        else:
            scorer = ConstantScorer(self.scorer_value)
        trace = sample_change_trace(
            scorer,
            self.lam,
            utterance.source_len,
            utterance.target_len,
            stable_utterance_seed(self.seed, utterance.id),
        )
        return change_to_actions(trace)


@dataclass(frozen=True)
class ScriptedPolicy:
    """Replays a fixed schedule; used by the wire server to re-derive
    metrics from a client's decision log."""

    actions: tuple[Action, ...]

    def plan(self, utterance: Utterance) -> list[Action]:
        return list(self.actions)


def policy_from_spec(spec: PolicySpec) -> Policy:
    if spec.kind == "waitk":
        return WaitKPolicy(spec.k)
    if spec.kind == "offline":
        return OfflinePolicy()
    return VmmaPolicy(spec.lam, spec.scorer, spec.scorer_value, spec.seed)


@dataclass(frozen=True)
class Event:
    t_us: int  # ideal clock
    wall_us: int  # computation-aware clock
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"t_us": self.t_us, "wall_us": self.wall_us, "kind": self.kind, **self.payload}


EVENT_KINDS = ("segment_arrived", "read", "write_unit", "vocoder_call", "emit_audio", "finish")


def event_from_dict(d: dict) -> Event:
    payload = {k: v for k, v in d.items() if k not in ("t_us", "wall_us", "kind")}
    if d["kind"] not in EVENT_KINDS:
        raise SessionError(f"unknown event kind {d['kind']!r}")
    return Event(int(d["t_us"]), int(d["wall_us"]), d["kind"], payload)


def synthetic_hypothesis_token(utterance: Utterance, index: int, consumed: int) -> int:
    """Stub translation model: correct once enough source is in, else a
    deterministic out-of-vocabulary guess. index is 1-based."""
    if consumed >= utterance.oracle_alignment[index - 1]:
        return utterance.target_tokens[index - 1]
    h = zlib.crc32(f"{utterance.id}|{index}|{consumed}".encode())
    return GUESS_BASE + h % GUESS_SPACE


def _us(ms: float) -> int:
    return round(ms * 1000)


@dataclass(frozen=True)
class SessionResult:
    utterance_id: str
    source_len: int
    target_len: int
    source_duration_us: int
    events: tuple[Event, ...]
    hypothesis: tuple[int, ...]
    consumption: tuple[int, ...]  # g(i): segments read before token i
    ideal_delays_us: tuple[int, ...]
    ca_delays_us: tuple[int, ...]
    full_source_index: Optional[int]
    quality: float

    @property
    def ideal_profile(self) -> DelayProfile:
        return DelayProfile(
            delays_ms=tuple(d / 1000 for d in self.ideal_delays_us),
            source_duration_ms=self.source_duration_us / 1000,
            variant=IDEAL,
            full_source_index=self.full_source_index,
        )

    @property
    def ca_profile(self) -> DelayProfile:
        return DelayProfile(
            delays_ms=tuple(d / 1000 for d in self.ca_delays_us),
            source_duration_ms=self.source_duration_us / 1000,
            variant=COMPUTATION_AWARE,
            full_source_index=self.full_source_index,
        )

    def report(self) -> LatencyReport:
        total_gap, _, _ = discontinuity_report(self.events)
        return build_report(self.ideal_profile, self.ca_profile, total_gap, self.target_len)

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.utterance_id,
                "src_len": self.source_len,
                "tgt_len": self.target_len,
                "source_duration_us": self.source_duration_us,
                "hypothesis": list(self.hypothesis),
                "consumption": list(self.consumption),
                "ideal_delays_us": list(self.ideal_delays_us),
                "ca_delays_us": list(self.ca_delays_us),
                "full_source_index": self.full_source_index,
                "quality": self.quality,
                "events": [e.to_dict() for e in self.events],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SessionResult":
        d = json.loads(text)
        return cls(
            utterance_id=d["id"],
            source_len=int(d["src_len"]),
            target_len=int(d["tgt_len"]),
            source_duration_us=int(d["source_duration_us"]),
            events=tuple(event_from_dict(e) for e in d["events"]),
            hypothesis=tuple(int(t) for t in d["hypothesis"]),
            consumption=tuple(int(g) for g in d["consumption"]),
            ideal_delays_us=tuple(int(x) for x in d["ideal_delays_us"]),
            ca_delays_us=tuple(int(x) for x in d["ca_delays_us"]),
            full_source_index=d["full_source_index"],
            quality=float(d["quality"]),
        )


def run_session(utterance: Utterance, config: SessionConfig, policy: Policy) -> SessionResult:
    """Drive one utterance through a policy schedule and log everything."""
    trace = policy.plan(utterance)
    M, N = utterance.source_len, utterance.target_len
    check = validate_trace(trace, M, N)
    if not check.ok:
        raise SessionError(f"policy produced an invalid schedule: {check.reason}")

    seg_ms = config.pre_decision_ms or utterance.source_token_duration_ms
    seg_us = _us(seg_ms)
    unit_us = _us(config.unit_ms)
    upt = config.units_per_token
    l = config.emission_rate_l
    dec_us = _us(config.compute.per_decision_ms)
    per_unit_us = _us(config.compute.per_unit_ms)
    measured = config.compute.kind == MEASURED
    if measured:
        import time

        last_perf = time.perf_counter()

    t_ideal = 0
    t_ca = 0
    r = w = 0
    events: list[Event] = []
    next_arrival = 1  # next segment index to log as arrived
    buffer: list[tuple[int, int, bool]] = []  # (token 1-based, unit, is_last)
    unit_counter = 0
    token_call_ideal: list[Optional[int]] = [None] * N
    token_call_ca: list[Optional[int]] = [None] * N
    hypothesis: list[int] = []
    consumption: list[int] = []
    spans: list[tuple[int, int]] = []  # playback (start_us, end_us)
    last_read_event_index = -1
    token_call_event_index: list[Optional[int]] = [None] * N

    def charge_decision() -> int:
        nonlocal last_perf
        if measured:
            now = time.perf_counter()
            delta = _us((now - last_perf) * 1000)
            last_perf = now
            return delta
        return dec_us

    def flush_arrivals(up_to_us: int):
        nonlocal next_arrival
        while next_arrival <= M and next_arrival * seg_us <= up_to_us:
            arr = next_arrival * seg_us
            events.append(Event(arr, arr, "segment_arrived", {"index": next_arrival}))
            next_arrival += 1

    def vocoder_flush():
        nonlocal t_ca, buffer
        batch = buffer
        buffer = []
        t_ca += len(batch) * per_unit_us
        call_index = len(events)
        events.append(
            Event(
                t_ideal,
                t_ca,
                "vocoder_call",
                {"n_units": len(batch), "tokens": sorted({tok for tok, _, _ in batch})},
            )
        )
        for tok, _, is_last in batch:
            if is_last:
                token_call_ideal[tok - 1] = t_ideal
                token_call_ca[tok - 1] = t_ca
                token_call_event_index[tok - 1] = call_index
        start = t_ca if not spans else max(t_ca, spans[-1][1])
        end = start + len(batch) * unit_us
        spans.append((start, end))
        events.append(Event(t_ideal, t_ca, "emit_audio", {"start_us": start, "end_us": end}))

    for a in trace:
        if a is Action.READ:
            r += 1
            arr = r * seg_us
            t_ideal = max(t_ideal, arr)
            t_ca = max(t_ca, arr) + charge_decision()
            flush_arrivals(t_ideal)
            last_read_event_index = len(events)
            events.append(Event(t_ideal, t_ca, "read", {"index": r}))
        else:
            w += 1
            t_ca += charge_decision()
            token = synthetic_hypothesis_token(utterance, w, r)
            hypothesis.append(token)
            consumption.append(r)
            for u in range(upt):
                is_last = u == upt - 1
                buffer.append((w, u, is_last))
                events.append(
                    Event(
                        t_ideal,
                        t_ca,
                        "write_unit",
                        {"token": w, "unit": u, "unit_id": unit_counter, "src_consumed": r},
                    )
                )
                unit_counter += 1
                if len(buffer) == l:
                    vocoder_flush()
            if w == N and buffer:
                vocoder_flush()  # nothing further can arrive; emit the tail

    flush_arrivals(M * seg_us)
    events.append(Event(max(t_ideal, M * seg_us), max(t_ca, M * seg_us), "finish", {}))

    full_source_index = None
    for i in range(N):
        idx = token_call_event_index[i]
        if idx is not None and idx > last_read_event_index:
            full_source_index = i + 1
            break

    quality = quality_score(hypothesis, utterance.target_tokens)
    return SessionResult(
        utterance_id=utterance.id,
        source_len=M,
        target_len=N,
        source_duration_us=M * seg_us,
        events=tuple(events),
        hypothesis=tuple(hypothesis),
        consumption=tuple(consumption),
        ideal_delays_us=tuple(int(x) for x in token_call_ideal),
        ca_delays_us=tuple(int(x) for x in token_call_ca),
        full_source_index=full_source_index,
        quality=quality,
    )


def discontinuity_report(events: Sequence[Event]) -> tuple[float, int, float]:
    """(total_gap_ms, gap_count, max_gap_ms) between emitted audio spans."""
    spans = [(e.payload["start_us"], e.payload["end_us"]) for e in events if e.kind == "emit_audio"]
    total = 0
    count = 0
    biggest = 0
    for (_, prev_end), (start, _) in zip(spans, spans[1:]):
        gap = start - prev_end
        if gap > 0:
            total += gap
            count += 1
            biggest = max(biggest, gap)
    return total / 1000, count, biggest / 1000


def recompute_result_from_events(result: SessionResult) -> SessionResult:
    """Re-derive delays and metrics purely from the event log.

    Used by the eval command to check stored numbers; ignores the stored
    delay fields entirely.
    """
    events = result.events
    last_unit_of_token: dict[int, int] = {}
    consumed_at_token: dict[int, int] = {}
    for e in events:
        if e.kind == "write_unit":
            tok = e.payload["token"]
            last_unit_of_token[tok] = e.payload["unit_id"]
            consumed_at_token[tok] = e.payload["src_consumed"]
    n = len(last_unit_of_token)
    ideal = [0] * n
    ca = [0] * n
    call_event_index = [None] * n
    seen_units = 0
    last_read_index = max(
        (i for i, e in enumerate(events) if e.kind == "read"), default=-1
    )
    for idx, e in enumerate(events):
        if e.kind != "vocoder_call":
            continue
        batch = e.payload["n_units"]
        lo, hi = seen_units, seen_units + batch - 1
        seen_units += batch
        for tok, unit_id in last_unit_of_token.items():
            if lo <= unit_id <= hi:
                ideal[tok - 1] = e.t_us
                ca[tok - 1] = e.wall_us
                call_event_index[tok - 1] = idx
    full_source_index = None
    for i in range(n):
        if call_event_index[i] is not None and call_event_index[i] > last_read_index:
            full_source_index = i + 1
            break
    return replace(
        result,
        ideal_delays_us=tuple(ideal),
        ca_delays_us=tuple(ca),
        full_source_index=full_source_index,
        consumption=tuple(consumed_at_token[i] for i in sorted(consumed_at_token)),
    )


def run_corpus(
    corpus: Sequence[Utterance], config: SessionConfig, policy: Optional[Policy] = None
) -> list[SessionResult]:
    pol = policy if policy is not None else policy_from_spec(config.policy)
    return [run_session(utt, config, pol) for utt in corpus]
