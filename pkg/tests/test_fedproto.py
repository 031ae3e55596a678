import struct
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from opboost import synthetic
from opboost.boost import BoostParams, Loss, OrdinalDataset, train
from opboost.domain import MappedDomain, RawFeature, map_values, ordinalize
from opboost.errors import DataError, ProtocolError
from opboost.fedproto import (
    FeatureMessage,
    MsgType,
    PartyB,
    SplitReply,
    SplitRequest,
    TcpListener,
    TrafficLedger,
    ValueStore,
    account_traffic,
    answer_split_request,
    decode,
    encode,
    finalize,
    loopback_pair,
    partyA_train,
    partyB_prepare,
    receive_features,
    run_loopback,
    send_features,
    tcp_connect,
)
from opboost.fedproto.wire import HEADER_SIZE, parse_header, reply_size
from opboost.mechanisms import MechanismSpec, make_rng
from opboost.metrics import weighted_kendall

DOM = MappedDomain(1, 100, 10)


def roundtrip(msg):
    data = encode(msg)
    mt, length = parse_header(data[:HEADER_SIZE])
    assert length == len(data) - HEADER_SIZE
    return decode(mt, data[HEADER_SIZE:])


@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 2**32 - 1), max_size=50))
def test_feature_message_codec(fid, ranks):
    back = roundtrip(FeatureMessage(fid, np.array(ranks, dtype=np.int64)))
    assert back.feature_id == fid and back.ranks.tolist() == ranks


@given(st.lists(st.tuples(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1)), max_size=40))
def test_split_request_codec(pairs):
    assert roundtrip(SplitRequest(tuple(pairs))) == SplitRequest(tuple(pairs))


@given(st.lists(st.tuples(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.integers(-(2**31), 2**31 - 1)), max_size=40))
def test_split_reply_codec(entries):
    assert roundtrip(SplitReply(tuple(entries))) == SplitReply(tuple(entries))


def test_wire_layout_is_bit_exact():
    data = encode(SplitReply(((3, 7, -2),)))
    assert data == b"OPB1" + bytes([3]) + struct.pack("<I", 16) + struct.pack("<IIIi", 1, 3, 7, -2)
    assert len(data) == reply_size(1) == HEADER_SIZE + 4 + 12


def test_codec_rejects_garbage():
    with pytest.raises(ProtocolError):
        parse_header(b"XXXX" + bytes(5))
    with pytest.raises(ProtocolError):
        parse_header(b"OPB1" + bytes([99]) + bytes(4))
    with pytest.raises(ProtocolError):
        decode(MsgType.SPLIT_REQ, struct.pack("<I", 3) + bytes(8))
    with pytest.raises(ProtocolError):
        decode(MsgType.FEATURE, struct.pack("<II", 0, 5) + bytes(4))


def features(X):
    return [RawFeature(X[:, j], 0.0, 1.0) for j in range(X.shape[1])]


def test_prepare_noiseless_ranks(rng):
    X = rng.uniform(0, 1, (300, 2))
    for spec in (None, MechanismSpec.global_map(DOM, 200)):
        msgs, store = partyB_prepare(features(X), spec, make_rng(0), DOM)
        for j, m in enumerate(msgs):
            mapped = map_values(X[:, j], 0, 1, DOM)
            assert m.ranks.tolist() == ordinalize(mapped).tolist()
            assert sorted(v for (f, _), v in store.values.items() if f == j) == sorted(mapped.tolist())


def test_prepare_is_deterministic(rng):
    X = rng.uniform(0, 1, (200, 2))
    spec = MechanismSpec.adj_map(DOM, 1.0)
    a, _ = partyB_prepare(features(X), spec, make_rng(5))
    b, _ = partyB_prepare(features(X), spec, make_rng(5))
    assert [m.ranks.tolist() for m in a] == [m.ranks.tolist() for m in b]


def test_kendall_decreases_with_budget(rng):
    x = rng.uniform(0, 1, 1000)
    plain = ordinalize(map_values(x, 0, 1, DOM))
    taus = []
    for eps in (0.08, 0.32, 1.28, 5.12):
        msgs, _ = partyB_prepare([RawFeature(x, 0, 1)], MechanismSpec.global_map(DOM, eps), make_rng(11))
        taus.append(weighted_kendall(plain, msgs[0].ranks))
    assert taus == sorted(taus)


def _regression(n=300, seed=0):
    X, y = synthetic.regression(n, np.random.default_rng(seed), informative=2, noise_features=1)
    return X, y


def test_zero_b_features_equals_local_training():
    X, y = _regression()
    params = BoostParams(num_trees=5)
    forest = partyA_train({}, {"x0": X[:, 0], "x1": X[:, 1]}, y, params)
    central = train(OrdinalDataset(np.column_stack([ordinalize(X[:, 0]), ordinalize(X[:, 1])]), y), params)
    assert forest.structure() == central.structure()
    assert forest.resolved


def test_noiseless_b_matches_centralized():
    X, y = _regression()
    params = BoostParams(num_trees=8)
    b = PartyB(0, features(X[:, 1:]), None, make_rng(0), DOM)
    run = run_loopback([b], {"x0": X[:, 0]}, y, params)
    mapped = [map_values(X[:, j], 0, 1, DOM) for j in (1, 2)]
    R = np.column_stack([ordinalize(X[:, 0])] + [ordinalize(m) for m in mapped])
    central = train(OrdinalDataset(R, y), params)
    assert run.forest.structure() == central.structure()


def test_constant_labels_give_constant_forest():
    X, _ = _regression(100)
    b = PartyB(0, features(X), MechanismSpec.global_map(DOM, 1.0), make_rng(0))
    run = run_loopback([b], {}, np.full(100, 3.0), BoostParams(num_trees=3))
    assert all(len(t) == 1 for t in run.forest.trees)
    assert run.ledger.total(phase="phase3") == 0


def test_inconsistent_n_is_a_protocol_error():
    msgs = {0: [FeatureMessage(0, np.arange(1, 11))]}
    with pytest.raises(ProtocolError):
        partyA_train(msgs, {}, np.zeros(12), BoostParams(num_trees=1))


def test_privacy_boundary_and_reply_values():
    X, y = _regression(200)
    spec = MechanismSpec.global_map(DOM, 0.5)
    b = PartyB(0, features(X), spec, make_rng(1))
    run = run_loopback([b], {}, y, BoostParams(num_trees=6))
    assert set(run.received) <= {MsgType.HELLO, MsgType.FEATURE, MsgType.END, MsgType.SPLIT_REPLY}
    stored = set(b.store.values.values())
    for _, _, node in run.forest.split_nodes():
        assert node.split_value in stored
    assert b.store.values[(0, 1)] == min(v for (f, _), v in b.store.values.items() if f == 0)


def test_missing_ordinal_is_reported_on_both_sides():
    a_end, b_end = loopback_pair()
    store = ValueStore({(0, 1): 5})
    errs = []

    def serve():
        try:
            answer_split_request(b_end, store)
        except ProtocolError as exc:
            errs.append(exc)

    t = threading.Thread(target=serve)
    t.start()
    a_end.send(SplitRequest(((0, 1), (0, 2))))
    with pytest.raises(ProtocolError, match="ordinal 2"):
        a_end.recv(MsgType.SPLIT_REPLY)
    t.join()
    assert errs


def test_reply_bytes_follow_the_layout():
    X, y = _regression(150)
    b = PartyB(0, features(X), MechanismSpec.global_map(DOM, 2.0), make_rng(1))
    run = run_loopback([b], {}, y, BoostParams(num_trees=4))
    pairs = len({(n.feature, n.split_ordinal) for _, _, n in run.forest.split_nodes()})
    assert run.ledger.total("b_to_a", "phase3") == reply_size(pairs)
    assert run.ledger.total("a_to_b", "phase3") == HEADER_SIZE + 4 + 8 * pairs


def test_zero_tree_model_costs_a_header():
    X, y = _regression(50)
    b = PartyB(0, features(X), None, make_rng(0), DOM)
    ledger = TrafficLedger()
    a_end, b_end = loopback_pair(ledger)
    send_features(b_end, 0, b.messages)
    user, msgs = receive_features(a_end)
    forest = partyA_train({user: msgs}, {}, y, BoostParams(num_trees=0))
    finalize(forest, a_end, 0, close_empty=True)
    assert answer_split_request(b_end, b.store).entries == ()
    assert ledger.total(phase="phase3") == HEADER_SIZE


def test_phase1_bytes_scale_linearly():
    ratios = []
    for n in (400, 800):
        X, y = _regression(n)
        b = PartyB(0, features(X), MechanismSpec.global_map(DOM, 1.0), make_rng(0))
        run = run_loopback([b], {}, y, BoostParams(num_trees=2))
        ratios.append(account_traffic(run.ledger, n, 1, 3, 2, 3, DOM.size))
    assert 0.9 <= ratios[1]["phase1_bytes"] / ratios[0]["phase1_bytes"] / 2 <= 1.1
    # fixed-width ranks cost 32 bits against ceil(log2 n) bits of information
    for r, n in zip(ratios, (400, 800)):
        assert r["phase1_ratio"] <= 1.02 * 32 / np.ceil(np.log2(n))
    for r in ratios:
        assert r["phase3_reply_bytes"] <= r["phase3_reply_limit"]


def test_store_persistence_lets_b_go_offline(tmp_path):
    X, y = _regression(120)
    b = PartyB(3, features(X), MechanismSpec.local_map(DOM, 1.0), make_rng(2))
    path = tmp_path / "store.csv"
    b.store.save(path)
    assert path.read_text().splitlines()[0] == "feature_id,ordinal,value"
    loaded = ValueStore.load(path)
    assert loaded == b.store
    a_end, b_end = loopback_pair()
    send_features(b_end, 3, b.messages)
    user, msgs = receive_features(a_end)
    forest = partyA_train({user: msgs}, {}, y, BoostParams(num_trees=3))
    t = threading.Thread(target=answer_split_request, args=(b_end, loaded))
    t.start()
    finalize(forest, a_end, 3)
    t.join()
    assert forest.resolved
    with pytest.raises(DataError):
        ValueStore.load(tmp_path / "missing.csv")


def test_two_users_and_determinism():
    X, y = _regression(200)
    spec = MechanismSpec.adj_map(DOM, 1.0)

    def once():
        parties = [PartyB(0, features(X[:, :1]), spec, make_rng(1)), PartyB(1, features(X[:, 1:]), spec, make_rng(2))]
        return run_loopback(parties, {}, y, BoostParams(num_trees=5))

    a, b = once(), once()
    assert a.forest.feature_keys == ["B0:0", "B1:0", "B1:1"]
    assert a.forest.dumps() == b.forest.dumps()
    assert a.ledger.breakdown() == b.ledger.breakdown()


def test_tcp_transport_matches_loopback():
    X, y = _regression(150)
    spec = MechanismSpec.global_map(DOM, 1.0)
    params = BoostParams(num_trees=4, loss=Loss.SQUARED)
    ledger = TrafficLedger()
    listener = TcpListener("127.0.0.1", 0, ledger, timeout=30)
    port = listener.address[1]
    b = PartyB(0, features(X), spec, make_rng(4))

    def party_b():
        with tcp_connect("127.0.0.1", port) as ch:
            send_features(ch, 0, b.messages)
        with tcp_connect("127.0.0.1", port) as ch:
            answer_split_request(ch, b.store, 0)

    t = threading.Thread(target=party_b)
    t.start()
    with listener.accept() as ch:
        user, msgs = receive_features(ch)
    forest = partyA_train({user: msgs}, {}, y, params)
    with listener.accept() as ch:
        ch.phase = "phase3"
        _, hello = ch.recv(MsgType.HELLO)
        finalize(forest, ch, hello.user_id)
    t.join()
    listener.close()
    reference = run_loopback([PartyB(0, features(X), spec, make_rng(4))], {}, y, params)
    assert forest.dumps() == reference.forest.dumps()
    assert ledger.total(phase="phase1") == reference.ledger.total(phase="phase1")
