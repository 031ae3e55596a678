"""Command-line runner: ``opboost <command> [options]``.

Settings come from an optional INI sidecar (``--config``) and are overridden
by command flags.  A sidecar looks like::

    [domain]
    L = 1
    R = 100
    theta = 10

    [mechanism]
    kind = adj          ; global | adj | local | grr | none
    epsilon = 1.0
    alpha = 1.0

    [data]
    path = train.csv
    label = target
    loss = squared      ; or logistic

    [boost]
    num_trees = 80

    [feature:age]
    lower = 0
    upper = 120
    owner = b           ; a, b, or b:<user id>

Exit codes: 0 success, 2 configuration error, 3 data error, 4 protocol error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import synthetic
from .audit import RECORD_HEADER, audit_bounded_dlap, audit_dldp, audit_partition_dldp
from .boost import BoostParams, Loss, accuracy, mse
from .domain import MappedDomain, RawFeature, map_values
from .errors import ConfigError, DataError, OpBoostError, ProtocolError
from .fedproto import (
    PartyB,
    TcpListener,
    TrafficLedger,
    ValueStore,
    account_traffic,
    answer_split_request,
    composition_summary,
    partyB_prepare,
    run_loopback,
    send_features,
    serve_party_a,
    tcp_connect,
)
from .fedproto.transport import parse_hostport
from .mechanisms import Kind, MechanismSpec, desensitize, make_rng
from .metrics import (
    SplitScenario,
    beta_monte_carlo,
    beta_split_probability,
    gamma_bound_adj,
    gamma_bound_global,
    gamma_grr,
    gamma_table,
    order_preserving_prob_exact,
    weighted_kendall,
)
from .rangequery import generate_queries, range_query_mse

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PROTOCOL = 0, 2, 3, 4
INFINITE_EPSILON = 200.0


# -- configuration -----------------------------------------------------------


@dataclass
class FeatureDecl:
    name: str
    lower: float
    upper: float
    owner: str = "b"
    role: str = "numeric"

    @property
    def party(self) -> str:
        return self.owner.split(":")[0]

    @property
    def user(self) -> int:
        _, _, u = self.owner.partition(":")
        return int(u) if u else 0


@dataclass
class ExperimentConfig:
    L: int = 1
    R: int = 100
    theta: int = 10
    kind: str = "global"
    epsilon: float = 1.0
    alpha: float = 1.0
    sampler: Optional[str] = None
    data_path: Optional[str] = None
    label: Optional[str] = None
    loss: str = "squared"
    boost: dict = field(default_factory=dict)
    features: list[FeatureDecl] = field(default_factory=list)

    @property
    def domain(self) -> MappedDomain:
        return MappedDomain(self.L, self.R, self.theta)

    def mechanism(self, epsilon: Optional[float] = None, alpha: Optional[float] = None, kind: Optional[str] = None):
        """``None`` for ``kind = none`` (no desensitization)."""
        kind = kind or self.kind
        eps = self.epsilon if epsilon is None else epsilon
        a = self.alpha if alpha is None else alpha
        if kind == "none":
            return None
        try:
            k = Kind(kind)
        except ValueError:
            raise ConfigError(f"unknown mechanism {kind!r}; choose global, adj, local, grr or none") from None
        if math.isinf(eps):
            eps = INFINITE_EPSILON
        if k is Kind.GLOBAL:
            return MechanismSpec.global_map(self.domain, eps, self.sampler)
        if k is Kind.GRR:
            return MechanismSpec.grr(self.domain, eps)
        if k is Kind.ADJ:
            return MechanismSpec.adj_map(self.domain, eps, a, self.sampler)
        return MechanismSpec.local_map(self.domain, eps, a, self.sampler)

    def boost_params(self) -> BoostParams:
        try:
            kw = {k: (float(v) if k in ("learning_rate", "reg_lambda", "min_split_gain") else int(v)) for k, v in self.boost.items()}
            return BoostParams(loss=Loss(self.loss), **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [boost] section: {exc}") from exc


def load_config(path: Optional[str], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = base if base is not None else ExperimentConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep the case of L and R
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    try:
        if parser.has_section("domain"):
            d = parser["domain"]
            cfg.L, cfg.R, cfg.theta = d.getint("L", cfg.L), d.getint("R", cfg.R), d.getint("theta", cfg.theta)
        if parser.has_section("mechanism"):
            m = parser["mechanism"]
            cfg.kind = m.get("kind", cfg.kind)
            cfg.epsilon = m.getfloat("epsilon", cfg.epsilon)
            cfg.alpha = m.getfloat("alpha", cfg.alpha)
            cfg.sampler = m.get("sampler", cfg.sampler)
        if parser.has_section("data"):
            d = parser["data"]
            cfg.data_path = d.get("path", cfg.data_path)
            if cfg.data_path and not Path(cfg.data_path).is_absolute():
                cfg.data_path = str(Path(path).parent / cfg.data_path)
            cfg.label = d.get("label", cfg.label)
            cfg.loss = d.get("loss", cfg.loss)
        if parser.has_section("boost"):
            cfg.boost = dict(parser["boost"])
        for sec in parser.sections():
            if sec.startswith("feature:"):
                s = parser[sec]
                cfg.features.append(
                    FeatureDecl(sec.split(":", 1)[1], s.getfloat("lower"), s.getfloat("upper"), s.get("owner", "b"), s.get("role", "numeric"))
                )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    return cfg


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    for attr in ("L", "R", "theta", "kind", "epsilon", "alpha", "sampler"):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, attr, v)
    if getattr(args, "data", None):
        cfg.data_path = args.data
    if getattr(args, "label", None):
        cfg.label = args.label
    if getattr(args, "loss", None):
        cfg.loss = args.loss
    for attr in ("num_trees", "max_layers", "learning_rate"):
        v = getattr(args, attr, None)
        if v is not None:
            cfg.boost[attr] = v
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    try:
        cfg.domain
    except OpBoostError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    for f in cfg.features:
        if not f.lower < f.upper:
            raise ConfigError(f"feature {f.name!r}: need lower < upper")
        if f.party not in ("a", "b"):
            raise ConfigError(f"feature {f.name!r}: owner must be a, b or b:<user>")
        if f.role not in ("numeric", "label"):
            raise ConfigError(f"feature {f.name!r}: role must be numeric or label")


def read_table(path: str) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames:
                raise DataError(f"{path}: missing header")
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    out = {}
    for name in reader.fieldnames:
        try:
            out[name] = np.array([float(r[name]) for r in rows])
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: column {name!r} is not numeric ({exc})") from exc
    return out


def _check_columns(table: dict, cfg: ExperimentConfig, need_label: bool) -> None:
    missing = [f.name for f in cfg.features if f.name not in table]
    if need_label and cfg.label not in table:
        missing.append(str(cfg.label))
    if missing:
        raise DataError(f"columns missing from data: {', '.join(missing)}")


# -- output helpers ----------------------------------------------------------


class _Output:
    def __init__(self, path: Optional[str]):
        self.path = path
        self.buf = io.StringIO()

    def write(self, text: str) -> None:
        self.buf.write(text)

    def close(self) -> None:
        text = self.buf.getvalue()
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _side_path(out: Optional[str], suffix: str, default: str) -> str:
    return str(Path(out).with_suffix(suffix)) if out else default


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- commands ----------------------------------------------------------------


def cmd_desensitize(args, cfg: ExperimentConfig) -> int:
    if not cfg.features:
        raise ConfigError("declare at least one [feature:<name>] section")
    if not cfg.data_path:
        raise ConfigError("no input data: give --data or [data] path")
    spec = cfg.mechanism()
    table = read_table(cfg.data_path)
    _check_columns(table, cfg, need_label=False)
    feats = [RawFeature(table[f.name], f.lower, f.upper, f.name) for f in cfg.features]
    messages, store = partyB_prepare(feats, spec, make_rng(args.seed), cfg.domain)
    by_rank = [{o: v for (fid, o), v in store.values.items() if fid == j} for j in range(len(feats))]
    out = _Output(args.out)
    w = csv.writer(out.buf, lineterminator="\n")
    w.writerow([c for f in cfg.features for c in (f.name, f"{f.name}_rank")])
    n = feats[0].values.size
    for i in range(n):
        row = []
        for j, m in enumerate(messages):
            r = int(m.ranks[i])
            row += [by_rank[j][r], r]
        w.writerow(row)
    out.close()
    store_path = args.store or _side_path(args.out, ".store.csv", "store.csv")
    store.save(store_path)
    label = spec.label if spec else "none"
    _info(f"desensitized {n} rows x {len(feats)} features with {label}; store written to {store_path}")
    return EXIT_OK


def cmd_audit(args, cfg: ExperimentConfig) -> int:
    ts = args.t or [1]
    out = _Output(args.out)
    out.write(RECORD_HEADER + "\n")
    failed = 0
    for t in ts:
        if cfg.kind == "bdlap":
            lam = args.lam if args.lam else 1.0 / cfg.epsilon
            lo, hi = args.window or (cfg.L, cfg.R)
            rep = audit_bounded_dlap(lam, (lo, hi), t)
        else:
            spec = cfg.mechanism()
            if spec is None:
                raise ConfigError("audit needs a mechanism")
            if args.partition:
                rep = audit_partition_dldp(spec, t)
            else:
                claimed = None if args.claimed_bound is None else args.claimed_bound * t
                rep = audit_dldp(spec, t, claimed)
        failed += not rep.passed
        out.write(rep.to_record() + "\n")
    out.close()
    _info(f"{len(ts) - failed}/{len(ts)} audits within the claimed bound")
    return EXIT_OK


def _metrics_gamma(args, cfg, w) -> None:
    ts, rows = gamma_table(domain_size=cfg.domain.size, theta=cfg.theta, epsilon=cfg.epsilon)
    w.writerow(["row", *[f"t={t}" for t in ts]])
    for name, vals in rows:
        w.writerow([name, *[f"{v:.4f}" for v in vals]])


def _metrics_order(args, cfg, w) -> None:
    d = cfg.domain
    w.writerow(["mechanism", "x1", "x2", "exact_prob", "bound", "slack"])
    for kind in ("global", "grr", "adj"):
        spec = cfg.mechanism(kind=kind)
        for x1 in range(d.L, d.R + 1):
            for x2 in range(x1 + 1, d.R + 1):
                t = x2 - x1
                if kind == "global":
                    bound = gamma_bound_global(t, spec.epsilon, d.size)
                elif kind == "grr":
                    bound = gamma_grr(t, spec.epsilon, d.size)
                else:
                    bound = gamma_bound_adj(t, spec.budget.epsilon_prt, d.theta, d.k)
                p = order_preserving_prob_exact(spec, x1, x2)
                w.writerow([spec.label, x1, x2, f"{p:.10f}", f"{bound:.10f}", f"{p - bound:.3e}"])


def _metrics_kendall(args, cfg, w) -> None:
    d = cfg.domain
    rng = make_rng(args.seed)
    plain = synthetic.uniform_values(args.n, d, rng)
    w.writerow(["mechanism", "epsilon", "weighted_kendall"])
    for kind in ("global", "adj", "local", "grr"):
        for eps in args.epsilons:
            spec = cfg.mechanism(epsilon=eps, kind=kind)
            tau = weighted_kendall(plain, desensitize(plain, spec, rng))
            w.writerow([spec.label, eps, f"{tau:.6f}"])


def _metrics_beta(args, cfg, w) -> None:
    d = cfg.domain
    rng = make_rng(args.seed)
    spec = cfg.mechanism()
    w.writerow(["scenario", "split_point", "beta_exact", "beta_mc", "mc_stderr"])
    for name, gen in (("uniform", synthetic.uniform_values), ("normal", synthetic.normal_values)):
        values = np.sort(gen(8, d, rng))
        for q in (0.25, 0.5):
            split = int(values[int(q * values.size) - 1])
            sc = SplitScenario(values, split, spec)
            mc, se = beta_monte_carlo(sc, args.trials, rng)
            w.writerow([name, split, f"{beta_split_probability(sc):.6f}", f"{mc:.6f}", f"{se:.2e}"])


def cmd_metrics(args, cfg: ExperimentConfig) -> int:
    out = _Output(args.out)
    w = csv.writer(out.buf, lineterminator="\n")
    {"gamma": _metrics_gamma, "order": _metrics_order, "kendall": _metrics_kendall, "beta": _metrics_beta}[args.table](args, cfg, w)
    out.close()
    return EXIT_OK


def _train_data(args, cfg: ExperimentConfig):
    """Returns (features, labels) with FeatureDecls, reading CSV or generating data."""
    if args.synthetic:
        rng = make_rng(args.seed)
        if args.synthetic == "regression":
            X, y = synthetic.regression(args.n, rng, informative=2, noise_features=1)
            cfg.loss = "squared"
        else:
            X, y = synthetic.classification(args.n, rng)
            cfg.loss = "logistic"
        if not cfg.features:
            cfg.features = [FeatureDecl(f"x{j}", 0.0, 1.0, "a" if j == 0 else "b") for j in range(X.shape[1])]
        if len(cfg.features) != X.shape[1]:
            raise ConfigError(f"synthetic data has {X.shape[1]} features; config declares {len(cfg.features)}")
        return {f.name: X[:, j] for j, f in enumerate(cfg.features)}, y
    if not cfg.data_path or not cfg.label:
        raise ConfigError("train needs --synthetic or a data path and label column")
    if not cfg.features:
        raise ConfigError("declare at least one [feature:<name>] section")
    table = read_table(cfg.data_path)
    _check_columns(table, cfg, need_label=True)
    return {f.name: table[f.name] for f in cfg.features}, table[cfg.label]


def _split(n: int, seed, test_fraction: float = 0.2):
    idx = make_rng(seed).permutation(n)
    cut = n - int(round(test_fraction * n))
    return np.sort(idx[:cut]), np.sort(idx[cut:])


def _b_parties(cfg, cols, tr) -> dict[int, list[RawFeature]]:
    users: dict[int, list[RawFeature]] = {}
    for f in cfg.features:
        if f.party == "b":
            users.setdefault(f.user, []).append(RawFeature(cols[f.name][tr], f.lower, f.upper, f.name))
    return users


def _test_matrix(cfg, cols, te, forest) -> np.ndarray:
    """Columns in the forest's order: raw values for A, mapped values for B."""
    by_key = {}
    counters: dict[int, int] = {}
    for f in cfg.features:
        if f.party == "a":
            by_key[f"A:{f.name}"] = cols[f.name][te]
        else:
            fid = counters.get(f.user, 0)
            counters[f.user] = fid + 1
            by_key[f"B{f.user}:{fid}"] = map_values(cols[f.name][te], f.lower, f.upper, cfg.domain)
    return np.stack([by_key[k] for k in forest.feature_keys], axis=1) if forest.feature_keys else np.zeros((te.size, 0))


def _write_train_outputs(args, cfg, forest, ledger, labels_test, X_test, n_train, spec, users) -> None:
    model_path = args.out or "model.txt"
    Path(model_path).write_text(forest.dumps())
    params = cfg.boost_params()
    pred = forest.predict(X_test) if X_test.shape[0] else np.array([])
    report = {"samples_train": n_train, "samples_test": int(labels_test.size), "mechanism": spec.label if spec else "none"}
    if labels_test.size:
        if params.loss is Loss.LOGISTIC:
            report["accuracy"] = accuracy(labels_test, pred)
        else:
            report["mse"] = mse(pred, labels_test)
    r = max((len(v) for v in users.values()), default=0)
    report.update(account_traffic(ledger, n_train, len(users), r, params.num_trees, params.max_layers, cfg.domain.size))
    nb = sum(len(v) for v in users.values())
    report.update({f"composition_{k}": v for k, v in composition_summary([spec] * nb).items() if k != "epsilon_each"})
    with open(_side_path(model_path, ".report.csv", "report.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in report.items():
            w.writerow([k, v])
    with open(_side_path(model_path, ".ledger.csv", "ledger.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["direction", "phase", "bytes"])
        for (d, p), b in sorted(ledger.breakdown().items()):
            w.writerow([d, p, b])
    for k, v in report.items():
        print(f"{k}: {v}")


def cmd_train(args, cfg: ExperimentConfig) -> int:
    spec = cfg.mechanism()
    params = cfg.boost_params()
    if args.role == "b" and not args.connect:
        raise ConfigError("--role b needs --connect host:port")
    if args.role == "a" and not args.listen:
        raise ConfigError("--role a needs --listen host:port")
    cols, labels = _train_data(args, cfg)
    tr, te = _split(labels.size, args.seed)
    users = _b_parties(cfg, cols, tr)
    local = {f.name: cols[f.name][tr] for f in cfg.features if f.party == "a"}

    if args.role == "b":
        return _run_b_tcp(args, cfg, users, spec)

    if args.role == "a":
        forest, ledger = _run_a_tcp(args, local, labels[tr], params, expected=args.parties or len(users))
    else:
        parties = [PartyB(u, feats, spec, make_rng(args.seed + 1 + u), cfg.domain) for u, feats in sorted(users.items())]
        run = run_loopback(parties, local, labels[tr], params)
        forest, ledger = run.forest, run.ledger
    _write_train_outputs(args, cfg, forest, ledger, labels[te], _test_matrix(cfg, cols, te, forest), tr.size, spec, users)
    return EXIT_OK


def _run_a_tcp(args, local, labels, params, expected: int):
    host, port = parse_hostport(args.listen)
    ledger = TrafficLedger()
    listener = TcpListener(host, port, ledger, timeout=args.timeout)
    _info(f"party A listening on {host}:{listener.address[1]} for {expected} party B user(s)")
    try:
        forest = serve_party_a(listener, expected, local, labels, params, timeout=args.timeout)
    finally:
        listener.close()
    return forest, ledger


def _run_b_tcp(args, cfg, users, spec) -> int:
    host, port = parse_hostport(args.connect)
    if args.user not in users:
        raise ConfigError(f"no features owned by user {args.user}")
    messages, store = partyB_prepare(users[args.user], spec, make_rng(args.seed + 1 + args.user), cfg.domain)
    store_path = args.store or _side_path(args.out, ".store.csv", f"store_b{args.user}.csv")
    store.save(store_path)
    with tcp_connect(host, port, wait=args.timeout) as ch:
        send_features(ch, args.user, messages)
    _info(f"user {args.user}: uploaded {len(messages)} rank column(s); store at {store_path}")
    # phase 3 is an independent session that only needs the persisted store
    store = ValueStore.load(store_path)
    with tcp_connect(host, port, wait=args.timeout) as ch:
        reply = answer_split_request(ch, store, args.user)
    _info(f"user {args.user}: answered {len(reply.entries)} split value(s)")
    return EXIT_OK


def cmd_rangequery(args, cfg: ExperimentConfig) -> int:
    d = cfg.domain
    out = _Output(args.out)
    w = csv.writer(out.buf, lineterminator="\n")
    w.writerow(["mechanism", "epsilon", "alpha", "theta", "mse_mean", "mse_std", "repeats"])
    if cfg.data_path:
        if not cfg.features:
            raise ConfigError("declare the [feature:<name>] section to query")
        f = cfg.features[0]
        table = read_table(cfg.data_path)
        _check_columns(table, cfg, need_label=False)
        base = map_values(table[f.name], f.lower, f.upper, d)
    else:
        base = None
    kinds = args.mechanisms or [cfg.kind]
    for kind in kinds:
        alphas = args.alphas if kind in ("adj", "local") else [cfg.alpha]
        for eps in args.epsilons or [cfg.epsilon]:
            for a in alphas:
                spec = cfg.mechanism(epsilon=eps, alpha=a, kind=kind)
                errs = []
                for rep in range(args.repeats):
                    rng = make_rng(args.seed + rep)
                    values = base if base is not None else synthetic.uniform_values(args.n, d, rng)
                    q = generate_queries(d, args.queries, rng)
                    noisy = values if spec is None else desensitize(values, spec, rng)
                    errs.append(range_query_mse(values, noisy, q))
                show_alpha = f"{a:g}" if kind in ("adj", "local") else ""
                w.writerow([kind, f"{eps:g}", show_alpha, d.theta, f"{np.mean(errs):.6e}", f"{np.std(errs):.6e}", args.repeats])
    out.close()
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _floats(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _ints(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _window(s: str) -> tuple[int, int]:
    lo, hi = _ints(s)
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the flags appear before or after the command name
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base random seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (default: standard output)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI sidecar with domain, mechanism, data and feature sections")

    mech = argparse.ArgumentParser(add_help=False)
    mech.add_argument("--L", type=int, dest="L", help="lower end of the mapped domain")
    mech.add_argument("--R", type=int, dest="R", help="upper end of the mapped domain")
    mech.add_argument("--theta", type=int, help="partition length")
    mech.add_argument("--mechanism", dest="kind", choices=["global", "adj", "local", "grr", "none", "bdlap"])
    mech.add_argument("--epsilon", type=float, help="privacy budget (inf allowed for training)")
    mech.add_argument("--alpha", type=float, help="partition/inner budget ratio")
    mech.add_argument("--sampler", choices=["exact", "bdlap"])

    p = argparse.ArgumentParser(prog="opboost", description="Order-preserving desensitization and rank-only boosting.", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("desensitize", parents=[common, mech], help="map, desensitize and rank CSV columns")
    s.add_argument("--data", help="input CSV")
    s.add_argument("--store", help="where to write the (feature_id, ordinal, value) store")

    s = sub.add_parser("audit", parents=[common, mech], help="exact worst-case privacy ratio audit")
    s.add_argument("--t", type=_ints, help="comma-separated distances (default 1)")
    s.add_argument("--partition", action="store_true", help="audit against the partition bound (adj only)")
    s.add_argument("--lam", type=float, help="discrete Laplace scale for --mechanism bdlap (default 1/epsilon)")
    s.add_argument("--window", type=_window, help="lo,hi output window for --mechanism bdlap")
    s.add_argument("--claimed-bound", type=float, dest="claimed_bound", help="per-unit-distance bound to test instead of epsilon")

    s = sub.add_parser("metrics", parents=[common, mech], help="order-preservation tables")
    s.add_argument("--table", choices=["gamma", "order", "kendall", "beta"], default="gamma")
    s.add_argument("--epsilons", type=_floats, default=[0.08, 0.32, 1.28, 5.12])
    s.add_argument("--n", type=int, default=1000, help="sample size for the Kendall sweep")
    s.add_argument("--trials", type=int, default=100_000, help="Monte Carlo trials for beta")

    s = sub.add_parser("train", parents=[common, mech], help="federated rank-only boosting")
    s.add_argument("--data", help="training CSV")
    s.add_argument("--label", help="label column")
    s.add_argument("--loss", choices=["squared", "logistic"])
    s.add_argument("--synthetic", choices=["regression", "classification"], help="generate data instead of reading a CSV")
    s.add_argument("--n", type=int, default=1000, help="synthetic sample count")
    s.add_argument("--num-trees", type=int, dest="num_trees")
    s.add_argument("--max-layers", type=int, dest="max_layers")
    s.add_argument("--learning-rate", type=float, dest="learning_rate")
    s.add_argument("--role", choices=["a", "b"], help="run one side over TCP (default: both, in-process)")
    s.add_argument("--listen", help="host:port for party A")
    s.add_argument("--connect", help="host:port of party A, for party B")
    s.add_argument("--user", type=int, default=0, help="party B user id")
    s.add_argument("--parties", type=int, help="number of party B users A waits for")
    s.add_argument("--store", help="party B store path")
    s.add_argument("--timeout", type=float, default=120.0, help="network timeout in seconds")

    s = sub.add_parser("rangequery", parents=[common, mech], help="range-query frequency error")
    s.add_argument("--data", help="CSV whose first declared feature is queried (default: synthetic uniform)")
    s.add_argument("--mechanisms", type=lambda v: v.split(","), help="comma-separated mechanism kinds")
    s.add_argument("--epsilons", type=_floats)
    s.add_argument("--alphas", type=_floats, default=[1.0])
    s.add_argument("--repeats", type=int, default=100)
    s.add_argument("--n", type=int, default=100, help="synthetic value count")
    s.add_argument("--queries", type=int, default=10_000)
    return p


COMMANDS = {
    "desensitize": cmd_desensitize,
    "audit": cmd_audit,
    "metrics": cmd_metrics,
    "train": cmd_train,
    "rangequery": cmd_rangequery,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("seed", 0), ("out", None), ("config", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        # range queries run on the wider [1, 1024] domain unless told otherwise
        base = ExperimentConfig(R=1024) if args.command == "rangequery" else None
        cfg = _apply_overrides(load_config(args.config, base), args)
        _validate(cfg)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _info(f"config error: {exc}")
        return EXIT_CONFIG
    except ProtocolError as exc:
        _info(f"protocol error: {exc}")
        return EXIT_PROTOCOL
    except DataError as exc:
        _info(f"data error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
