"""The two parties of the federated training workflow.

Party B (a feature holder) desensitizes its columns locally and ships only
the ranks of the desensitized values.  Party A (the label holder) trains on
ranks, then asks each B for the desensitized values sitting at the split
ordinals it chose.  Between the two exchanges B keeps nothing but its
value store, which can live on disk.
"""

from __future__ import annotations

import csv
import math
import queue
import threading
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ..boost import BoostParams, OrdinalDataset, PartialForest, resolve_from_values, train
from ..domain import MappedDomain, RawFeature, map_values, ordinalize
from ..errors import DataError, ProtocolError
from ..mechanisms import MechanismSpec, desensitize
from .transport import Channel, TcpListener, TrafficLedger, loopback_pair
from .wire import HEADER_SIZE, FeatureMessage, Hello, MsgType, SplitReply, SplitRequest

PHASE_FEATURES = "phase1"
PHASE_SPLITS = "phase3"


# -- Party B -----------------------------------------------------------------


@dataclass
class ValueStore:
    """Desensitized values held by B, keyed by ``(feature_id, ordinal)``."""

    values: dict[tuple[int, int], int] = field(default_factory=dict)

    def lookup(self, feature_id: int, ordinal: int) -> int:
        try:
            return self.values[(feature_id, ordinal)]
        except KeyError:
            raise ProtocolError(f"no stored value for feature {feature_id} ordinal {ordinal}") from None

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_id", "ordinal", "value"])
            for (f, o), v in sorted(self.values.items()):
                w.writerow([f, o, v])

    @classmethod
    def load(cls, path) -> "ValueStore":
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
            return cls({(int(r["feature_id"]), int(r["ordinal"])): int(r["value"]) for r in rows})
        except (OSError, KeyError, ValueError, TypeError) as exc:
            raise DataError(f"cannot read value store {path}: {exc}") from exc


def partyB_prepare(
    raw: Sequence[RawFeature],
    spec: Optional[MechanismSpec],
    rng: np.random.Generator,
    domain: Optional[MappedDomain] = None,
) -> tuple[list[FeatureMessage], ValueStore]:
    """Map, desensitize and rank every feature.

    ``spec=None`` skips desensitization (the infinite-budget path); ``domain``
    is then required for mapping.
    """
    if spec is not None:
        domain = spec.domain
    if domain is None:
        raise DataError("need a mechanism or a mapped domain")
    if not raw:
        return [], ValueStore()
    n = raw[0].values.size
    messages, store = [], ValueStore()
    for fid, feat in enumerate(raw):
        if feat.values.size != n:
            raise DataError("all features of one party must have the same length")
        mapped = map_values(feat.values, feat.lower, feat.upper, domain)
        noisy = mapped if spec is None else desensitize(mapped, spec, rng)
        ranks = ordinalize(noisy)
        store.values.update({(fid, int(r)): int(v) for r, v in zip(ranks, noisy)})
        messages.append(FeatureMessage(fid, ranks))
    return messages, store


def send_features(channel: Channel, user_id: int, messages: Sequence[FeatureMessage]) -> None:
    channel.phase = PHASE_FEATURES
    channel.send(Hello(user_id, 1))
    for m in messages:
        channel.send(m)
    channel.send_end()


def answer_split_request(channel: Channel, store: ValueStore, user_id: Optional[int] = None) -> SplitReply:
    """Serve one phase-3 exchange.  With ``user_id`` a hello frame is sent first."""
    channel.phase = PHASE_SPLITS
    if user_id is not None:
        channel.send(Hello(user_id, 3))
    mt, req = channel.recv()
    if mt is MsgType.END:
        return SplitReply(())
    if mt is not MsgType.SPLIT_REQ:
        raise ProtocolError(f"expected SPLIT_REQ, got {mt.name}")
    try:
        reply = SplitReply(tuple((f, o, store.lookup(f, o)) for f, o in req.pairs))
    except ProtocolError as exc:
        channel.send_error(str(exc))
        raise
    channel.send(reply)
    return reply


class PartyB:
    """A feature holder: prepare once, then answer one split request."""

    def __init__(self, user_id: int, features: Sequence[RawFeature], spec: Optional[MechanismSpec], rng, domain=None):
        self.user_id = user_id
        self.messages, self.store = partyB_prepare(features, spec, rng, domain)

    def send_features(self, channel: Channel) -> None:
        send_features(channel, self.user_id, self.messages)

    def answer(self, channel: Channel, hello: bool = False) -> SplitReply:
        return answer_split_request(channel, self.store, self.user_id if hello else None)


# -- Party A -----------------------------------------------------------------


def receive_features(channel: Channel, hello: Optional[Hello] = None) -> tuple[int, list[FeatureMessage]]:
    """Read one B's hello + feature stream.  Returns ``(user_id, messages)``.

    Pass ``hello`` when the caller has already read it.
    """
    if hello is None:
        channel.phase = PHASE_FEATURES
        _, hello = channel.recv(MsgType.HELLO)
    if hello.phase != 1:
        raise ProtocolError(f"expected a phase-1 session, got phase {hello.phase}")
    messages = []
    while True:
        mt, msg = channel.recv()
        if mt is MsgType.END:
            return hello.user_id, messages
        if mt is not MsgType.FEATURE:
            raise ProtocolError(f"unexpected {mt.name} during feature upload")
        messages.append(msg)


def b_key(user_id: int, feature_id: int) -> str:
    return f"B{user_id}:{feature_id}"


def parse_b_key(key: str) -> Optional[tuple[int, int]]:
    if not key.startswith("B"):
        return None
    user, _, fid = key[1:].partition(":")
    return int(user), int(fid)


def partyA_train(
    messages: Mapping[int, Sequence[FeatureMessage]],
    local_features: Mapping[str, np.ndarray],
    labels,
    params: BoostParams = BoostParams(),
) -> PartialForest:
    """Train on A's own columns plus every B rank column.

    ``messages`` maps user id to that user's feature messages.  Columns are
    ordered A-local first (in the given order, keyed ``A:name``), then B
    columns sorted by ``(user_id, feature_id)``.  A-local splits are resolved
    to values immediately; B splits keep their ordinals.
    """
    labels = np.asarray(labels, dtype=float)
    n = labels.size
    cols, keys = [], []
    local = {name: np.asarray(v) for name, v in local_features.items()}
    for name, v in local.items():
        if v.size != n:
            raise DataError(f"local feature {name!r} has {v.size} rows, expected {n}")
        cols.append(ordinalize(v))
        keys.append(f"A:{name}")
    merged = {}
    for user in sorted(messages):
        for m in messages[user]:
            if (user, m.feature_id) in merged:
                raise ProtocolError(f"duplicate feature {m.feature_id} from user {user}")
            if m.n != n:
                raise ProtocolError(f"user {user} feature {m.feature_id}: n={m.n}, expected {n}")
            merged[(user, m.feature_id)] = m.ranks
    for (user, fid) in sorted(merged):
        cols.append(merged[(user, fid)])
        keys.append(b_key(user, fid))
    X = np.stack(cols, axis=1) if cols else np.zeros((n, 0), dtype=np.int64)
    forest = train(OrdinalDataset(X, labels, keys), params)
    for j, name in enumerate(local):
        resolve_from_values(forest, j, local[name])
    return forest


def split_request_for(forest: PartialForest, user_id: int) -> tuple[SplitRequest, dict[tuple[int, int], int]]:
    """The request to send ``user_id`` plus a map from its (fid, ordinal) to forest column."""
    column_of = {}
    for j, key in enumerate(forest.feature_keys):
        parsed = parse_b_key(key)
        if parsed and parsed[0] == user_id:
            column_of[parsed[1]] = j
    by_col = {j: fid for fid, j in column_of.items()}
    pairs = tuple((by_col[j], o) for j, o in forest.unresolved() if j in by_col)
    return SplitRequest(pairs), {(by_col[j], o): j for j, o in forest.unresolved() if j in by_col}


def finalize(forest: PartialForest, link: Channel, user_id: int, close_empty: bool = False) -> PartialForest:
    """Resolve ``user_id``'s split ordinals over ``link``; mutates and returns ``forest``.

    Nothing is sent when no split uses this user's features, unless
    ``close_empty`` asks for a bare END frame (used to release a waiting
    TCP peer).
    """
    link.phase = PHASE_SPLITS
    request, columns = split_request_for(forest, user_id)
    if not request.pairs:
        if close_empty:
            link.send_end()
        return forest
    link.send(request)
    _, reply = link.recv(MsgType.SPLIT_REPLY)
    got = [(f, o) for f, o, _ in reply.entries]
    if got != list(request.pairs):
        raise ProtocolError("split reply does not match the request")
    forest.resolve({(columns[(f, o)], o): v for f, o, v in reply.entries}, set(columns.values()))
    return forest


def users_in(forest: PartialForest) -> list[int]:
    return sorted({p[0] for k in forest.feature_keys if (p := parse_b_key(k))})


# -- accounting --------------------------------------------------------------


def account_traffic(ledger: TrafficLedger, n: int, m: int, r: int, T: int, layers: int, domain_size: int) -> dict:
    """Measured bytes per phase against the information-theoretic scale.

    ``m`` counts B users that upload ``r`` features each.  Ratios near a
    constant across ``n`` indicate the expected growth law.
    """
    log_n = max(1, math.ceil(math.log2(max(n, 2))))
    log_d = max(1, math.ceil(math.log2(max(domain_size, 2))))
    p1 = ledger.total(phase=PHASE_FEATURES)
    p3 = ledger.total(phase=PHASE_SPLITS)
    nodes = (2**layers - 1) * T
    scale1 = m * r * n * log_n / 8
    scale3 = nodes * (log_n + log_d) / 8
    return {
        "phase1_bytes": p1,
        "phase3_bytes": p3,
        "bytes_a_to_b": ledger.bytes_a_to_b,
        "bytes_b_to_a": ledger.bytes_b_to_a,
        "phase1_ratio": p1 / scale1 if scale1 else math.nan,
        "phase3_ratio": p3 / scale3 if scale3 else math.nan,
        "phase1_fixed_width_ratio": p1 / (m * r * n * 4) if m * r * n else math.nan,
        "phase3_reply_bytes": ledger.total("b_to_a", PHASE_SPLITS),
        "phase3_reply_limit": m * (HEADER_SIZE + 4) + 12 * nodes,
    }


def composition_summary(specs: Sequence[Optional[MechanismSpec]]) -> dict:
    """Total budget spent on one sample across independently desensitized features."""
    eps = [s.epsilon for s in specs if s is not None]
    return {"features": len(specs), "epsilon_each": eps, "epsilon_total": float(sum(eps))}


# -- in-process runner -------------------------------------------------------


@dataclass
class FederatedRun:
    forest: PartialForest
    ledger: TrafficLedger
    received: list[MsgType]


def run_loopback(
    parties: Sequence[PartyB],
    local_features: Mapping[str, np.ndarray],
    labels,
    params: BoostParams = BoostParams(),
) -> FederatedRun:
    """Run both phases in-process, one thread per Party B.

    ``received`` lists every frame type Party A read, which lets callers
    check the privacy boundary.
    """
    ledger = TrafficLedger()
    received: list[MsgType] = []
    errors: list[BaseException] = []

    def spawn(fn, *args):
        def body():
            try:
                fn(*args)
            except BaseException as exc:  # surfaced after join
                errors.append(exc)
        t = threading.Thread(target=body, daemon=True)
        t.start()
        return t

    def record(ch: Channel) -> Channel:
        orig = ch.recv_frame

        def recv_frame():
            mt, payload = orig()
            received.append(mt)
            return mt, payload
        ch.recv_frame = recv_frame  # type: ignore[method-assign]
        return ch

    uploads = {}
    threads = []
    ends = []
    for b in parties:
        a_end, b_end = loopback_pair(ledger)
        ends.append((record(a_end), b_end))
        threads.append(spawn(b.send_features, b_end))
    for a_end, _ in ends:
        user, msgs = receive_features(a_end)
        uploads[user] = msgs
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    forest = partyA_train(uploads, local_features, labels, params)
    threads = []
    for b, (a_end, b_end) in zip(parties, ends):
        if split_request_for(forest, b.user_id)[0].pairs:
            threads.append(spawn(b.answer, b_end))
            finalize(forest, a_end, b.user_id)
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return FederatedRun(forest, ledger, received)


def serve_party_a(
    listener: TcpListener,
    expected: int,
    local_features: Mapping[str, np.ndarray],
    labels,
    params: BoostParams = BoostParams(),
    timeout: float = 120.0,
) -> PartialForest:
    """Party A over TCP: collect ``expected`` uploads, train, then resolve splits.

    Every B session starts with a hello naming its phase.  Phase-1 sessions
    are served concurrently; phase-3 sessions that arrive before training
    ends wait in a queue.  The listener's ledger records the traffic.
    """
    uploads: dict[int, list[FeatureMessage]] = {}
    waiting: "queue.Queue[tuple[int, Channel]]" = queue.Queue()
    errors: "queue.Queue[BaseException]" = queue.Queue()
    uploaded = threading.Semaphore(0)
    lock = threading.Lock()

    def session(ch: Channel) -> None:
        try:
            _, hello = ch.recv(MsgType.HELLO)
            if hello.phase == 3:
                waiting.put((hello.user_id, ch))
                return
            with ch:
                user, msgs = receive_features(ch, hello)
            with lock:
                if user in uploads:
                    raise ProtocolError(f"user {user} uploaded twice")
                uploads[user] = msgs
            uploaded.release()
        except BaseException as exc:  # reported by the main thread
            errors.put(exc)
            uploaded.release()

    def accept_all() -> None:
        try:
            for _ in range(2 * expected):
                threading.Thread(target=session, args=(listener.accept(),), daemon=True).start()
        except BaseException as exc:
            errors.put(exc)
            for _ in range(expected):
                uploaded.release()

    def check() -> None:
        if not errors.empty():
            raise errors.get()

    acceptor = threading.Thread(target=accept_all, daemon=True)
    acceptor.start()
    for _ in range(expected):
        if not uploaded.acquire(timeout=timeout):
            raise ProtocolError("timed out waiting for feature uploads")
        check()
    forest = partyA_train(uploads, local_features, labels, params)
    for _ in range(expected):
        try:
            user, ch = waiting.get(timeout=timeout)
        except queue.Empty:
            check()
            raise ProtocolError("timed out waiting for split-value sessions") from None
        with ch:
            finalize(forest, ch, user, close_empty=True)
    check()
    return forest
