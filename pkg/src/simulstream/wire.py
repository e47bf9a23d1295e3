"""Newline-delimited JSON wire protocol for networked evaluation.

One session per connection. The server owns the corpus and the session
config; the client is the deciding agent. Flow:

    server -> HELLO     {utterance, config, done}
    client -> READ_REQ  {}                  (one per planned READ)
    server -> SEGMENT   {index, payload, arrival_ms}   or EOS_SRC
    client -> WRITE     {token_index, token, src_consumed}
    client -> EOS_TGT   {}
    server -> METRICS   {al_ms, ca_al_ms, mean_delay_ms, discont_ms,
                         n_tokens, quality}

Both ends stamp messages with per-direction sequence numbers and reject
regressions. The server re-derives metrics by replaying the client's
decision sequence through the same timing engine, so a correct client
sees METRICS identical to its own in-process numbers.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, asdict
from typing import Optional

from .corpus import Utterance
from .actions import Action
from .session import (
    ComputeModel,
    PolicySpec,
    ScriptedPolicy,
    SessionConfig,
    SessionResult,
    policy_from_spec,
    run_session,
    synthetic_hypothesis_token,
)

MESSAGE_TYPES = ("HELLO", "SEGMENT", "READ_REQ", "WRITE", "EOS_SRC", "EOS_TGT", "METRICS")


class ProtocolError(RuntimeError):
    pass


def config_to_dict(config: SessionConfig) -> dict:
    d = asdict(config)
    return d


def config_from_dict(d: dict) -> SessionConfig:
    policy = PolicySpec(**d["policy"])
    compute = ComputeModel(**d["compute"])
    rest = {k: v for k, v in d.items() if k not in ("policy", "compute")}
    return SessionConfig(policy=policy, compute=compute, **rest)


class _Channel:
    """Framed JSON messages with per-direction sequence checking."""

    def __init__(self, sock: socket.socket, session_id: str = ""):
        self.rfile = sock.makefile("r", encoding="utf-8", newline="\n")
        self.wfile = sock.makefile("w", encoding="utf-8", newline="\n")
        self.session_id = session_id
        self._send_seq = 0
        self._recv_seq = 0

    def send(self, msg_type: str, body: dict) -> None:
        if msg_type not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {msg_type!r}")
        self._send_seq += 1
        record = {
            "type": msg_type,
            "session_id": self.session_id,
            "seq_no": self._send_seq,
            "body": body,
        }
        self.wfile.write(json.dumps(record) + "\n")
        self.wfile.flush()

    def recv(self) -> tuple[str, dict]:
        line = self.rfile.readline()
        if not line:
            raise ProtocolError("connection closed")
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed message: {exc}") from exc
        msg_type = record.get("type")
        if msg_type not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {msg_type!r}")
        seq = record.get("seq_no")
        if not isinstance(seq, int) or seq <= self._recv_seq:
            raise ProtocolError(f"sequence number regression: {seq} after {self._recv_seq}")
        self._recv_seq = seq
        return msg_type, record.get("body", {})

    def close(self):
        try:
            self.rfile.close()
            self.wfile.close()
        except OSError:
            pass


def _metrics_body(result: SessionResult) -> dict:
    report = result.report()
    return {
        "id": result.utterance_id,
        "al_ms": report.al_ms,
        "ca_al_ms": report.ca_al_ms,
        "mean_delay_ms": report.mean_delay_ms,
        "discont_ms": report.discontinuity_total_ms,
        "n_tokens": report.num_output_tokens,
        "quality": result.quality,
    }


class EvalServer:
    """Serves one session per connection, in corpus order."""

    def __init__(
        self,
        host: str,
        port: int,
        corpus: list[Utterance],
        config: SessionConfig,
        fast_forward: bool = True,
    ):
        self.corpus = corpus
        self.config = config
        self.fast_forward = fast_forward
        self.results: dict[str, SessionResult] = {}
        self.failures: list[str] = []
        self._next = 0
        self._lock = threading.Lock()
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                outer._handle(self.connection)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((host, port), Handler)
        self.address = self._server.server_address
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def start(self):
        self._thread.start()
        return self

    def shutdown(self):
        self._server.shutdown()
        self._server.server_close()

    def _claim(self) -> Optional[Utterance]:
        with self._lock:
            if self._next >= len(self.corpus):
                return None
            utt = self.corpus[self._next]
            self._next += 1
            return utt

    def _handle(self, conn: socket.socket):
        utt = self._claim()
        chan = _Channel(conn, session_id=utt.id if utt else "")
        try:
            if utt is None:
                chan.send("HELLO", {"done": True})
                return
            chan.send(
                "HELLO",
                {
                    "done": False,
                    "utterance": json.loads(utt.to_json()),
                    "config": config_to_dict(self.config),
                },
            )
            seg_ms = self.config.pre_decision_ms or utt.source_token_duration_ms
            actions: list[Action] = []
            tokens: list[int] = []
            r = 0
            t0 = time.monotonic()
            while True:
                msg_type, body = chan.recv()
                if msg_type == "READ_REQ":
                    if r >= utt.source_len:
                        chan.send("EOS_SRC", {})
                        continue
                    r += 1
                    actions.append(Action.READ)
                    if not self.fast_forward:
                        wait_s = (r * seg_ms) / 1000 - (time.monotonic() - t0)
                        if wait_s > 0:
                            time.sleep(wait_s)
                    chan.send(
                        "SEGMENT",
                        {
                            "index": r,
                            "payload": utt.source_tokens[r - 1],
                            "arrival_ms": r * seg_ms,
                        },
                    )
                elif msg_type == "WRITE":
                    actions.append(Action.WRITE)
                    tokens.append(int(body["token"]))
                elif msg_type == "EOS_TGT":
                    break
                else:
                    raise ProtocolError(f"unexpected {msg_type} from client")
            result = run_session(utt, self.config, ScriptedPolicy(tuple(actions)))
            if list(result.hypothesis) != tokens:
                raise ProtocolError("client tokens disagree with replay")
            self.results[utt.id] = result
            chan.send("METRICS", _metrics_body(result))
        except (ProtocolError, OSError, KeyError, ValueError) as exc:
            with self._lock:
                self.failures.append(f"{chan.session_id or '?'}: {exc}")
        finally:
            chan.close()


def serve(
    host: str, port: int, corpus: list[Utterance], config: SessionConfig, fast_forward: bool = True
) -> EvalServer:
    return EvalServer(host, port, corpus, config, fast_forward).start()


@dataclass(frozen=True)
class SessionExchange:
    utterance_id: str
    client_metrics: dict
    server_metrics: dict

    def max_field_gap(self) -> float:
        keys = ("al_ms", "ca_al_ms", "mean_delay_ms", "discont_ms", "quality")
        gaps = [abs(self.client_metrics[k] - self.server_metrics[k]) for k in keys]
        gaps.append(abs(self.client_metrics["n_tokens"] - self.server_metrics["n_tokens"]))
        return max(gaps)


def run_client_session(host: str, port: int) -> Optional[SessionExchange]:
    """Run one networked session; None when the server is out of work."""
    with socket.create_connection((host, port)) as sock:
        chan = _Channel(sock)
        msg_type, body = chan.recv()
        if msg_type != "HELLO":
            raise ProtocolError(f"expected HELLO, got {msg_type}")
        if body.get("done"):
            return None
        utt = Utterance.from_json(json.dumps(body["utterance"]))
        config = config_from_dict(body["config"])
        chan.session_id = utt.id
        policy = policy_from_spec(config.policy)
        plan = policy.plan(utt)
        r = 0
        w = 0
        for action in plan:
            if action is Action.READ:
                chan.send("READ_REQ", {})
                msg_type, seg = chan.recv()
                if msg_type == "EOS_SRC":
                    continue
                if msg_type != "SEGMENT":
                    raise ProtocolError(f"expected SEGMENT, got {msg_type}")
                r += 1
                if seg["index"] != r:
                    raise ProtocolError("segment order violated")
            else:
                w += 1
                token = synthetic_hypothesis_token(utt, w, r)
                chan.send("WRITE", {"token_index": w, "token": token, "src_consumed": r})
        chan.send("EOS_TGT", {})
        msg_type, server_metrics = chan.recv()
        if msg_type != "METRICS":
            raise ProtocolError(f"expected METRICS, got {msg_type}")
        local = run_session(utt, config, ScriptedPolicy(tuple(plan)))
        return SessionExchange(utt.id, _metrics_body(local), server_metrics)


def connect(host: str, port: int, max_sessions: Optional[int] = None) -> list[SessionExchange]:
    """Drain the server session by session until it reports done."""
    out = []
    while max_sessions is None or len(out) < max_sessions:
        exchange = run_client_session(host, port)
        if exchange is None:
            break
        out.append(exchange)
    return out
