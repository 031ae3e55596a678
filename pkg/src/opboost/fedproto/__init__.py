"""Two-party rank-only training protocol: wire codec, transports and parties."""

from .party import (
    PHASE_FEATURES,
    PHASE_SPLITS,
    FederatedRun,
    PartyB,
    ValueStore,
    account_traffic,
    answer_split_request,
    composition_summary,
    finalize,
    partyA_train,
    partyB_prepare,
    receive_features,
    run_loopback,
    send_features,
    serve_party_a,
    split_request_for,
    users_in,
)
from .transport import LoopbackChannel, SocketChannel, TcpListener, TrafficLedger, loopback_pair, tcp_connect
from .wire import FeatureMessage, Hello, MsgType, SplitReply, SplitRequest, decode, encode

__all__ = [name for name in dir() if not name.startswith("_")]
